use proptest::prelude::*;
use verna_agents::{paz_describe, Containment};
use verna_core::scene::bundled_scene;
use verna_core::Trajectory;

/// Independent containment test straight from the bounds array.
fn inside(b: [f64; 6], p: [f64; 3]) -> bool {
    (0..3).all(|d| b[2 * d] <= p[d] && p[d] <= b[2 * d + 1])
}

fn well_formed(c: &Containment, len: usize) -> bool {
    match c {
        Containment::InsideDuring(runs) => {
            !runs.is_empty()
                && runs.iter().all(|(s, e)| s <= e && *e < len)
                && runs.windows(2).all(|w| w[0].1 + 1 < w[1].0)
                && !(runs.len() == 1 && runs[0] == (0, len - 1))
        }
        _ => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bit_vectors_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..80)) {
        let c = Containment::from_bits(&bits);
        prop_assert!(well_formed(&c, bits.len()));
        prop_assert_eq!(c.to_bits(bits.len()), bits.clone());
        prop_assert_eq!(c == Containment::AlwaysInside, bits.iter().all(|b| *b));
        prop_assert_eq!(c == Containment::NeverInside, bits.iter().all(|b| !*b));
    }

    #[test]
    fn reports_reconstruct_containment(
        scene_ix in 0usize..2,
        picks in proptest::collection::vec((0usize..12, -1.0f64..11.0, -1.0f64..11.0, 0.0f64..3.0), 1..60),
    ) {
        let scene = bundled_scene(["reach_avoid", "treasure_hunt"][scene_ix]).unwrap();
        // mix object centers (known inside) with arbitrary points
        let points: Vec<[f64; 3]> = picks
            .iter()
            .map(|&(k, x, y, z)| if k < scene.objects.len() { scene.objects[k].bounds.center() } else { [x, y, z] })
            .collect();
        let traj = Trajectory::new(points.iter().map(|p| p.to_vec()).collect(), 0.5).unwrap();
        let report = paz_describe(&traj, &scene);
        prop_assert_eq!(report.objects.len(), scene.objects.len());
        prop_assert_eq!(report.rendered_text.lines().count(), scene.objects.len() + 1);
        for (o, r) in scene.objects.iter().zip(&report.objects) {
            prop_assert_eq!(&o.name, &r.name);
            let expected: Vec<bool> = points.iter().map(|p| inside(o.bounds.bounds(), *p)).collect();
            prop_assert!(well_formed(&r.containment, points.len()));
            prop_assert_eq!(r.containment.to_bits(points.len()), expected);
            let line = report.rendered_text.lines().find(|l| l.starts_with(&format!("- {}:", o.name))).unwrap();
            if let Containment::InsideDuring(runs) = &r.containment {
                for (s, e) in runs {
                    let needle = format!("steps {s}..{e}");
                    prop_assert!(line.contains(&needle));
                }
            }
        }
    }
}

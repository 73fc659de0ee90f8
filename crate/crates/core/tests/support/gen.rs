//! Random formulas and signals for property checks.
#![allow(dead_code)]

use rand::Rng;
use verna_core::dsl;
use verna_core::scene::Scene;
use verna_core::stl::{inside_cuboid, outside_cuboid, Cuboid, Formula, Interval, LinearPredicate, PosDims, Trajectory};

/// Signal with `len` samples of dimension `dim`; values are mostly small
/// integers so ties and exact zeros show up often.
pub fn signal(rng: &mut impl Rng, len: usize, dim: usize) -> Trajectory<f64> {
    let states = (0..len)
        .map(|_| {
            (0..dim)
                .map(|_| if rng.gen_bool(0.6) { rng.gen_range(-3i32..=3) as f64 } else { rng.gen_range(-3.0..3.0) })
                .collect()
        })
        .collect();
    Trajectory::new(states, 1.0).unwrap()
}

fn predicate(rng: &mut impl Rng, dim: usize) -> Formula<f64> {
    loop {
        let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
        if let Ok(p) = LinearPredicate::new(coeffs, rng.gen_range(-2i32..=2) as f64 * 0.5) {
            return Formula::Pred(p);
        }
    }
}

fn interval(rng: &mut impl Rng, budget: usize) -> Interval {
    let lo = rng.gen_range(0..=budget);
    let hi = rng.gen_range(lo..=budget);
    Interval::new(lo, hi).unwrap()
}

/// Formula of depth at most `depth` whose horizon fits in `budget` steps.
pub fn formula(rng: &mut impl Rng, depth: usize, budget: usize, dim: usize) -> Formula<f64> {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.1) { Formula::True } else { predicate(rng, dim) };
    }
    match rng.gen_range(0..7) {
        0 => formula(rng, depth - 1, budget, dim).not(),
        1 | 2 => {
            let n = rng.gen_range(2..=3);
            let cs = (0..n).map(|_| formula(rng, depth - 1, budget, dim)).collect();
            if rng.gen_bool(0.5) {
                Formula::And(cs)
            } else {
                Formula::Or(cs)
            }
        }
        3 => {
            let i = interval(rng, budget);
            formula(rng, depth - 1, budget - i.hi(), dim).eventually(i)
        }
        4 => {
            let i = interval(rng, budget);
            formula(rng, depth - 1, budget - i.hi(), dim).always(i)
        }
        _ => {
            let i = interval(rng, budget);
            let a = formula(rng, depth - 1, budget - i.hi(), dim);
            let b = formula(rng, depth - 1, budget - i.hi(), dim);
            a.until(b, i)
        }
    }
}

/// Formula the DSL can express: cuboid atoms, `TRUE` and linear predicates.
pub fn dsl_formula(rng: &mut impl Rng, depth: usize, scene: &Scene, dt_steps: usize) -> Formula<f64> {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..6) {
            0 => Formula::True,
            1 => {
                let coeffs: Vec<f64> = (0..6).map(|i| if i == rng.gen_range(0..6) { 1.5 } else { rng.gen_range(-1i32..=1) as f64 }).collect();
                let coeffs = if coeffs.iter().all(|c| *c == 0.0) { vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0] } else { coeffs };
                Formula::Pred(LinearPredicate::new(coeffs, rng.gen_range(-40i32..40) as f64 / 8.0).unwrap())
            }
            2 => {
                let lo: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-20i32..20) as f64 / 4.0);
                let c = Cuboid::new(lo, lo.map(|v| v + rng.gen_range(1i32..12) as f64 / 4.0)).unwrap();
                inside_cuboid(&c, PosDims::DRONE)
            }
            n => {
                let o = &scene.objects[rng.gen_range(0..scene.objects.len())];
                if n % 2 == 0 {
                    inside_cuboid(&o.bounds, PosDims::DRONE)
                } else {
                    outside_cuboid(&o.bounds, PosDims::DRONE)
                }
            }
        };
    }
    let sub = |rng: &mut _| dsl_formula(rng, depth - 1, scene, dt_steps);
    match rng.gen_range(0..6) {
        0 => sub(rng).not(),
        1 | 2 => {
            let n = rng.gen_range(2..=4);
            let cs = (0..n).map(|_| sub(rng)).collect();
            if rng.gen_bool(0.5) {
                Formula::And(cs)
            } else {
                Formula::Or(cs)
            }
        }
        3 => sub(rng).eventually(interval(rng, dt_steps)),
        4 => sub(rng).always(interval(rng, dt_steps)),
        _ => {
            let a = sub(rng);
            a.until(sub(rng), interval(rng, dt_steps))
        }
    }
}

pub fn round_trips(phi: &Formula<f64>, scene: &Scene, dt: f64) -> Result<(), String> {
    let text = dsl::format(phi, scene, dt);
    let back = dsl::parse(&dsl::DslSource::new(&text, scene, dt)).map_err(|e| format!("{text}\n{}", e.render(&text)))?;
    if &back == phi {
        Ok(())
    } else {
        Err(format!("structure changed for {text}"))
    }
}

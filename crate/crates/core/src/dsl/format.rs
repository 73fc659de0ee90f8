use crate::scene::Scene;
use crate::stl::{match_cuboid, Formula, Interval, PosDims};

/// Canonical DSL text for `phi`. Cuboids matching a scene object are printed
/// by name, others by their numeric bounds; step intervals are printed in
/// seconds.
pub fn format(phi: &Formula<f64>, scene: &Scene, dt: f64) -> String {
    let mut out = String::new();
    Printer { scene, dt }.expr(phi, &mut out);
    out
}

struct Printer<'a> {
    scene: &'a Scene,
    dt: f64,
}

/// Shortest decimal that survives `str::parse` unchanged.
fn num(v: f64) -> String {
    format!("{v}")
}

impl Printer<'_> {
    /// Shortest decimal string for `steps * dt` that maps back to `steps`.
    fn time(&self, steps: usize) -> String {
        let t = steps as f64 * self.dt;
        for prec in 0..=17 {
            let s = format!("{t:.prec$}");
            let back: f64 = s.parse().expect("formatted float parses");
            if (back / self.dt).round() == steps as f64 {
                return s;
            }
        }
        num(t)
    }

    fn interval(&self, i: &Interval) -> String {
        format!("{}, {}", self.time(i.lo()), self.time(i.hi()))
    }

    fn expr(&self, phi: &Formula<f64>, out: &mut String) {
        match phi {
            Formula::And(cs) | Formula::Or(cs) if match_cuboid(phi, PosDims::DRONE).is_none() => {
                let sep = if matches!(phi, Formula::And(_)) { " & " } else { " | " };
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(sep);
                    }
                    if is_junction(c) {
                        out.push('(');
                        self.expr(c, out);
                        out.push(')');
                    } else {
                        self.term(c, out);
                    }
                }
            }
            _ => self.term(phi, out),
        }
    }

    /// Anything but a bare (non-cuboid) conjunction or disjunction.
    fn term(&self, phi: &Formula<f64>, out: &mut String) {
        match phi {
            Formula::Not(c) => {
                out.push('~');
                if is_junction(c) {
                    out.push('(');
                    self.expr(c, out);
                    out.push(')');
                } else {
                    self.term(c, out);
                }
            }
            Formula::Eventually(i, c) => {
                self.receiver(c, out);
                out.push_str(&format!(".eventually({})", self.interval(i)));
            }
            Formula::Always(i, c) => {
                self.receiver(c, out);
                out.push_str(&format!(".always({})", self.interval(i)));
            }
            Formula::Until(a, b, i) => {
                self.receiver(a, out);
                out.push_str(".until(");
                self.expr(b, out);
                out.push_str(&format!(", {})", self.interval(i)));
            }
            _ => self.atom(phi, out),
        }
    }

    fn receiver(&self, phi: &Formula<f64>, out: &mut String) {
        if is_junction(phi) || matches!(phi, Formula::Not(_)) {
            out.push('(');
            self.expr(phi, out);
            out.push(')');
        } else {
            self.term(phi, out);
        }
    }

    fn atom(&self, phi: &Formula<f64>, out: &mut String) {
        match phi {
            Formula::True => out.push_str("TRUE"),
            Formula::Pred(p) => {
                let coeffs: Vec<String> = p.coeffs().iter().map(|&c| num(c)).collect();
                out.push_str(&format!("STL_formulas.linear([{}], {})", coeffs.join(", "), num(p.offset())));
            }
            _ => {
                let (c, inside) = match_cuboid(phi, PosDims::DRONE).expect("junctions are handled by expr");
                let func = if inside { "inside_cuboid" } else { "outside_cuboid" };
                match self.scene.object_with_bounds(&c) {
                    Some(o) => out.push_str(&format!("STL_formulas.{func}(\"{}\")", o.name)),
                    None => {
                        let b: Vec<String> = c.bounds().iter().map(|&v| num(v)).collect();
                        out.push_str(&format!("STL_formulas.{func}([{}])", b.join(", ")));
                    }
                }
            }
        }
    }
}

fn is_junction(phi: &Formula<f64>) -> bool {
    matches!(phi, Formula::And(_) | Formula::Or(_)) && match_cuboid(phi, PosDims::DRONE).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, DslSource};
    use crate::scene::bundled_scene;
    use crate::stl::{inside_cuboid, Cuboid};

    #[test]
    fn canonical_forms() {
        let scene = bundled_scene("reach_avoid").unwrap();
        let goal = inside_cuboid(&scene.object("goal").unwrap().bounds, PosDims::DRONE);
        assert_eq!(format(&Formula::True, &scene, 1.0), "TRUE");
        assert_eq!(format(&goal.clone().not(), &scene, 1.0), r#"~STL_formulas.inside_cuboid("goal")"#);
        let odd = inside_cuboid(&Cuboid::from_bounds([0.0, 0.5, 1.0, 2.0, 0.0, 1.0]).unwrap(), PosDims::DRONE);
        assert_eq!(format(&odd, &scene, 1.0), "STL_formulas.inside_cuboid([0, 0.5, 1, 2, 0, 1])");
    }

    #[test]
    fn second_round_trip_is_byte_identical() {
        let scene = bundled_scene("reach_avoid").unwrap();
        let src = r#"STL_formulas.inside_cuboid("goal").eventually(0, 50) & STL_formulas.outside_cuboid("obstacle1").always(0,50)"#;
        let once = format(&parse(&DslSource::new(src, &scene, 0.5)).unwrap(), &scene, 0.5);
        let twice = format(&parse(&DslSource::new(&once, &scene, 0.5)).unwrap(), &scene, 0.5);
        assert_eq!(once, twice);
        assert_eq!(
            once,
            r#"STL_formulas.inside_cuboid("goal").eventually(0, 50) & STL_formulas.outside_cuboid("obstacle1").always(0, 50)"#
        );
    }

    #[test]
    fn times_print_shortest() {
        let scene = bundled_scene("reach_avoid").unwrap();
        let phi = Formula::True.always(Interval::new(3, 7).unwrap());
        assert_eq!(format(&phi, &scene, 0.1), "TRUE.always(0.3, 0.7)");
    }
}

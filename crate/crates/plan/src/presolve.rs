//! Activity-based bound propagation over the model rows.

use crate::model::{MicpModel, Sense, VarKind};

const FEAS_TOL: f64 = 1e-7;

/// Tightens `lb`/`ub` in place; binaries are rounded inward. Returns a
/// description of the first contradiction found.
pub(crate) fn propagate(m: &MicpModel, lb: &mut [f64], ub: &mut [f64], max_passes: usize) -> Result<(), String> {
    let integer: Vec<bool> = m.vars.iter().map(|v| v.kind == VarKind::Binary).collect();
    for _ in 0..max_passes {
        let mut changed = false;
        for row in &m.rows {
            let dirs: &[f64] = match row.sense {
                Sense::Le => &[1.0],
                Sense::Ge => &[-1.0],
                Sense::Eq => &[1.0, -1.0],
            };
            for &s in dirs {
                // s * (a x) <= s * rhs
                let b = s * row.rhs;
                let mut min_act = 0.0;
                for &(j, c) in &row.coeffs {
                    let a = s * c;
                    min_act += if a > 0.0 { a * lb[j] } else { a * ub[j] };
                }
                if min_act > b + FEAS_TOL * (1.0 + b.abs()) {
                    return Err(format!("constraint {} cannot be met", row.name));
                }
                for &(j, c) in &row.coeffs {
                    let a = s * c;
                    let own = if a > 0.0 { a * lb[j] } else { a * ub[j] };
                    let slack = b - (min_act - own);
                    if a > 0.0 {
                        let mut nb = slack / a;
                        if integer[j] {
                            nb = (nb + 1e-9).floor();
                        }
                        if nb < ub[j] - 1e-7 * (1.0 + ub[j].abs()) {
                            ub[j] = nb;
                            changed = true;
                        }
                    } else {
                        let mut nb = slack / a;
                        if integer[j] {
                            nb = (nb - 1e-9).ceil();
                        }
                        if nb > lb[j] + 1e-7 * (1.0 + lb[j].abs()) {
                            lb[j] = nb;
                            changed = true;
                        }
                    }
                    if lb[j] > ub[j] {
                        if lb[j] - ub[j] > FEAS_TOL * (1.0 + ub[j].abs()) {
                            return Err(format!("variable {} has no admissible value (row {})", m.vars[j].name, row.name));
                        }
                        let mid = 0.5 * (lb[j] + ub[j]);
                        lb[j] = mid;
                        ub[j] = mid;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixes_binaries_and_detects_conflicts() {
        let mut m = MicpModel::default();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0);
        let z = m.add_var("z", VarKind::Binary, 0.0, 1.0);
        // x - 20 z >= 12 - 20: z = 1 needs x >= 12
        m.add_row(vec![(x, 1.0), (z, -20.0)], Sense::Ge, -8.0);
        let mut lb: Vec<f64> = m.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = m.vars.iter().map(|v| v.ub).collect();
        propagate(&m, &mut lb, &mut ub, 10).unwrap();
        assert_eq!(ub[z], 0.0);
        m.add_row(vec![(z, 1.0)], Sense::Eq, 1.0);
        let mut lb: Vec<f64> = m.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = m.vars.iter().map(|v| v.ub).collect();
        assert!(propagate(&m, &mut lb, &mut ub, 10).is_err());
    }
}

//! Random planning instances and independent checks for solver tests.
#![allow(dead_code)]

use rand::Rng;
use verna_core::stl::{Cuboid, Formula, Interval, LinearPredicate};
use verna_plan::{DroneModel, InitialState, PlanProblem, Vec3};

pub fn workspace() -> Cuboid<f64> {
    Cuboid::new([0.0, 0.0, 0.0], [4.0, 4.0, 2.0]).unwrap()
}

/// `sign * (p_d - c) >= 0` with the threshold on a quarter grid.
fn halfspace(rng: &mut impl Rng) -> Formula<f64> {
    let d = rng.gen_range(0..3);
    let hi = if d == 2 { 2.0 } else { 4.0 };
    let c = (rng.gen_range(0.0..hi) * 4.0_f64).round() / 4.0;
    let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let mut coeffs = vec![0.0; 6];
    coeffs[d] = s;
    Formula::Pred(LinearPredicate::new(coeffs, -s * c).unwrap())
}

fn interval(rng: &mut impl Rng, budget: usize) -> Interval {
    let lo = rng.gen_range(0..=budget);
    let hi = rng.gen_range(lo..=budget.min(lo + 4));
    Interval::new(lo, hi).unwrap()
}

/// Position specification of depth at most `depth` and horizon at most `budget`.
pub fn formula(rng: &mut impl Rng, depth: usize, budget: usize) -> Formula<f64> {
    if depth == 0 || rng.gen_bool(0.15) {
        return if rng.gen_bool(0.05) { Formula::True } else { halfspace(rng) };
    }
    match rng.gen_range(0..8) {
        0 => formula(rng, depth - 1, budget).not(),
        1 | 2 => {
            let cs = (0..2).map(|_| formula(rng, depth - 1, budget)).collect();
            if rng.gen_bool(0.5) {
                Formula::And(cs)
            } else {
                Formula::Or(cs)
            }
        }
        3 | 4 => {
            let i = interval(rng, budget);
            formula(rng, depth - 1, budget - i.hi()).eventually(i)
        }
        5 | 6 => {
            let i = interval(rng, budget);
            formula(rng, depth - 1, budget - i.hi()).always(i)
        }
        _ => {
            let i = interval(rng, budget);
            let l = formula(rng, depth - 1, budget - i.hi());
            l.until(formula(rng, depth - 1, budget - i.hi()), i)
        }
    }
}

/// Instance over the small workspace with a start at rest on the quarter grid.
pub fn instance(rng: &mut impl Rng, depth: usize, max_steps: usize) -> PlanProblem {
    let ws = workspace();
    let t = rng.gen_range(2..=max_steps);
    let phi = formula(rng, depth, t);
    let p0 = [0, 1, 2].map(|d| (rng.gen_range(ws.min()[d]..=ws.max()[d]) * 4.0_f64).round() / 4.0);
    PlanProblem::new(DroneModel::for_workspace(&ws), phi, t, InitialState::at_rest(p0))
}

/// Explicit double-integrator rollout, written out independently of the crate.
pub fn integrate(m: &DroneModel, x0: InitialState, controls: &[Vec3]) -> Vec<[f64; 6]> {
    let mut s = [x0.p[0], x0.p[1], x0.p[2], x0.v[0], x0.v[1], x0.v[2]];
    let mut out = vec![s];
    for a in controls {
        for d in 0..3 {
            s[d] += m.dt * s[d + 3];
            s[d + 3] += m.dt * a[d];
        }
        out.push(s);
    }
    out
}

/// `sum_t v_t' Q v_t + a_t' R a_t` with explicit loops.
pub fn quadratic_cost(prob: &PlanProblem, states: &[[f64; 6]], controls: &[Vec3]) -> f64 {
    let mut j = 0.0;
    for (s, a) in states.iter().zip(controls) {
        for r in 0..3 {
            for c in 0..3 {
                j += s[3 + r] * prob.q[r][c] * s[3 + c] + a[r] * prob.r[r][c] * a[c];
            }
        }
    }
    j
}

/// Relative difference of two objectives.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    // objectives of a few 1e-3 or less are compared absolutely at 1e-7
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

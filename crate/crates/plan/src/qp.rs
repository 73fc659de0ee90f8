//! Convex QP subproblems solved with Clarabel.
//!
//! Fixed variables are substituted, redundant rows dropped and single-variable
//! rows folded into bounds before the interior-point solve.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT};

use crate::model::Sense;

const FIX_TOL: f64 = 1e-10;
const ROW_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Default)]
pub(crate) struct Qp {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
    /// Same convention as the model objective: `c x_i x_j`, `i <= j`.
    pub quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) enum QpOutcome {
    /// `duals[i]` is the multiplier of `rows[i]` (0 for rows presolve removed).
    Solved { x: Vec<f64>, duals: Vec<f64> },
    Infeasible(String),
    TimedOut,
    Failed(String),
}

impl Qp {
    pub fn n(&self) -> usize {
        self.lb.len()
    }

    pub fn add_var(&mut self, lb: f64, ub: f64) -> usize {
        self.lb.push(lb);
        self.ub.push(ub);
        self.lb.len() - 1
    }

    pub fn solve(&self, time_limit: f64) -> QpOutcome {
        if time_limit <= 0.0 {
            return QpOutcome::TimedOut;
        }
        let n = self.n();
        let mut lb = self.lb.clone();
        let mut ub = self.ub.clone();
        for j in 0..n {
            if lb[j] > ub[j] + ROW_TOL {
                return QpOutcome::Infeasible(format!("empty bounds on variable {j}"));
            }
        }
        // fold single-variable rows into bounds until nothing changes
        let mut pending: Vec<(usize, &(Vec<(usize, f64)>, Sense, f64))> = self.rows.iter().enumerate().collect();
        for _ in 0..3 {
            let fixed = |j: usize, lb: &[f64], ub: &[f64]| ub[j] - lb[j] <= FIX_TOL;
            let mut next = Vec::new();
            let mut tightened = false;
            for (ri, row) in pending {
                let (coeffs, sense, rhs) = row;
                let mut r = *rhs;
                let mut free = Vec::new();
                for &(j, c) in coeffs {
                    if c == 0.0 {
                        continue;
                    }
                    if fixed(j, &lb, &ub) {
                        r -= c * 0.5 * (lb[j] + ub[j]);
                    } else {
                        free.push((j, c));
                    }
                }
                let (mut lo_act, mut hi_act) = (0.0, 0.0);
                for &(j, c) in &free {
                    lo_act += (c * lb[j]).min(c * ub[j]);
                    hi_act += (c * lb[j]).max(c * ub[j]);
                }
                let tol = ROW_TOL * (1.0 + r.abs());
                let (need_le, need_ge) = match sense {
                    Sense::Le => (true, false),
                    Sense::Ge => (false, true),
                    Sense::Eq => (true, true),
                };
                if (need_le && lo_act > r + tol) || (need_ge && hi_act < r - tol) {
                    return QpOutcome::Infeasible("linear constraints conflict with the variable bounds".into());
                }
                let le_redundant = !need_le || hi_act <= r + 1e-12 * (1.0 + r.abs());
                let ge_redundant = !need_ge || lo_act >= r - 1e-12 * (1.0 + r.abs());
                if le_redundant && ge_redundant {
                    continue;
                }
                if free.len() == 1 {
                    let (j, c) = free[0];
                    let v = r / c;
                    let (tighten_ub, tighten_lb) = match (sense, c > 0.0) {
                        (Sense::Eq, _) => (true, true),
                        (Sense::Le, true) | (Sense::Ge, false) => (true, false),
                        _ => (false, true),
                    };
                    if tighten_ub && v < ub[j] {
                        ub[j] = v;
                    }
                    if tighten_lb && v > lb[j] {
                        lb[j] = v;
                    }
                    if lb[j] > ub[j] {
                        if lb[j] - ub[j] > ROW_TOL * (1.0 + v.abs()) {
                            return QpOutcome::Infeasible("bounds conflict".into());
                        }
                        let mid = 0.5 * (lb[j] + ub[j]);
                        lb[j] = mid;
                        ub[j] = mid;
                    }
                    tightened = true;
                    continue;
                }
                next.push((ri, row));
            }
            pending = next;
            if !tightened {
                break;
            }
        }
        // the kept rows were reduced against bounds from the final pass
        let fixed = |j: usize| ub[j] - lb[j] <= FIX_TOL;
        let mut rows = Vec::with_capacity(pending.len());
        for (ri, (coeffs, sense, rhs)) in pending {
            let mut r = *rhs;
            let mut free = Vec::new();
            for &(j, c) in coeffs {
                if c == 0.0 {
                    continue;
                }
                if fixed(j) {
                    r -= c * 0.5 * (lb[j] + ub[j]);
                } else {
                    free.push((j, c));
                }
            }
            if free.is_empty() {
                let viol = match sense {
                    Sense::Le => -r,
                    Sense::Ge => r,
                    Sense::Eq => r.abs(),
                };
                if viol > ROW_TOL * (1.0 + r.abs()) {
                    return QpOutcome::Infeasible("linear constraints conflict with the variable bounds".into());
                }
                continue;
            }
            rows.push((ri, free, *sense, r));
        }

        let mut col = vec![usize::MAX; n];
        let mut free_vars = Vec::new();
        for j in 0..n {
            if !fixed(j) {
                col[j] = free_vars.len();
                free_vars.push(j);
            }
        }
        let nf = free_vars.len();
        let mut x = vec![0.0; n];
        for j in 0..n {
            if fixed(j) {
                x[j] = 0.5 * (lb[j] + ub[j]);
            }
        }
        if nf == 0 {
            return QpOutcome::Solved { x, duals: vec![0.0; self.rows.len()] };
        }

        let mut q = vec![0.0; nf];
        let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
        for &(i, j, c) in &self.quad {
            match (fixed(i), fixed(j)) {
                (true, true) => {}
                (false, true) => q[col[i]] += c * x[j],
                (true, false) => q[col[j]] += c * x[i],
                (false, false) => {
                    let (a, b) = (col[i].min(col[j]), col[i].max(col[j]));
                    pi.push(a);
                    pj.push(b);
                    pv.push(if a == b { 2.0 * c } else { c });
                }
            }
        }
        for &(j, c) in &self.linear {
            if !fixed(j) {
                q[col[j]] += c;
            }
        }

        let (mut ai, mut aj, mut av, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut push_row = |coeffs: &[(usize, f64)], scale: f64, rhs: f64, b: &mut Vec<f64>| {
            let r = b.len();
            for &(j, c) in coeffs {
                ai.push(r);
                aj.push(col[j]);
                av.push(scale * c);
            }
            b.push(scale * rhs);
        };
        // origin[k]: index into `self.rows` of cone row k
        let mut origin = Vec::new();
        for (ri, coeffs, _, rhs) in rows.iter().filter(|r| r.2 == Sense::Eq) {
            push_row(coeffs, 1.0, *rhs, &mut b);
            origin.push(*ri);
        }
        let n_eq = b.len();
        for (ri, coeffs, sense, rhs) in &rows {
            match sense {
                Sense::Le => push_row(coeffs, 1.0, *rhs, &mut b),
                Sense::Ge => push_row(coeffs, -1.0, *rhs, &mut b),
                Sense::Eq => continue,
            }
            origin.push(*ri);
        }
        for &j in &free_vars {
            if ub[j].is_finite() {
                push_row(&[(j, 1.0)], 1.0, ub[j], &mut b);
            }
            if lb[j].is_finite() {
                push_row(&[(j, 1.0)], -1.0, lb[j], &mut b);
            }
        }
        let m = b.len();
        let p = CscMatrix::new_from_triplets(nf, nf, pi, pj, pv);
        let a = CscMatrix::new_from_triplets(m, nf, ai, aj, av);
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if n_eq > 0 {
            cones.push(ZeroConeT(n_eq));
        }
        if m > n_eq {
            cones.push(NonnegativeConeT(m - n_eq));
        }
        let settings = match DefaultSettingsBuilder::default().verbose(false).time_limit(time_limit).max_iter(400).build() {
            Ok(s) => s,
            Err(e) => return QpOutcome::Failed(format!("solver settings: {e:?}")),
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return QpOutcome::Failed(format!("solver setup: {e:?}")),
        };
        solver.solve();
        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                for (k, &j) in free_vars.iter().enumerate() {
                    x[j] = solver.solution.x[k].clamp(lb[j], ub[j]);
                }
                let mut duals = vec![0.0; self.rows.len()];
                for (k, &ri) in origin.iter().enumerate() {
                    duals[ri] = solver.solution.z[k];
                }
                QpOutcome::Solved { x, duals }
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => QpOutcome::Infeasible("no point satisfies the constraints".into()),
            SolverStatus::MaxTime => QpOutcome::TimedOut,
            s => QpOutcome::Failed(format!("interior-point solver stopped: {s:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_qp() {
        // min x^2 + y^2  s.t. x + y >= 2, y fixed at 0.5
        let qp = Qp {
            lb: vec![-10.0, 0.5],
            ub: vec![10.0, 0.5],
            rows: vec![(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 2.0)],
            quad: vec![(0, 0, 1.0), (1, 1, 1.0)],
            linear: vec![],
        };
        match qp.solve(10.0) {
            QpOutcome::Solved { x, .. } => {
                assert!((x[0] - 1.5).abs() < 1e-7);
                assert_eq!(x[1], 0.5);
            }
            o => panic!("{o:?}"),
        }
        let mut two = qp.clone();
        two.lb[1] = -10.0;
        two.ub[1] = 10.0;
        match two.solve(10.0) {
            QpOutcome::Solved { x, duals } => {
                assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
                // stationarity: 2x = lambda
                assert!((duals[0] - 2.0).abs() < 1e-6, "{duals:?}");
            }
            o => panic!("{o:?}"),
        }
        two.rows.push((vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0));
        assert!(matches!(two.solve(10.0), QpOutcome::Infeasible(_)));
    }
}

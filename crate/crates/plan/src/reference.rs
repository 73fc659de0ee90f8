//! Brute-force reference solver for desk-scale instances.
//!
//! The specification is expanded into a monotone boolean expression over
//! literals `h(x_k) >= margin`, independently of the big-M encoder. Literal
//! assignments are enumerated in lexicographic order; every minimal satisfying
//! assignment yields a convex QP over the controls (dynamics condensed out),
//! solved with ADMM and polished on the detected active set. Non-minimal
//! assignments only add constraints, so skipping them loses nothing.

use nalgebra::{DMatrix, DVector};
use verna_core::stl::{Formula, LinearPredicate};

use crate::dynamics::{PlanProblem, Vec3};
use crate::encode::STRICT_EPS;
use crate::solve::{certify, SolveResult, SolveStatus};
use crate::PlanError;

pub const MAX_BINARIES: usize = 20;
pub const MAX_STEPS: usize = 15;
/// Stationarity and feasibility tolerance of every QP solve.
pub const KKT_TOL: f64 = 1e-6;
const MAX_EXPR_NODES: usize = 1 << 20;

#[derive(Debug, Clone)]
enum Expr {
    Const(bool),
    Lit(usize),
    All(Vec<Expr>),
    Any(Vec<Expr>),
}

impl Expr {
    fn eval(&self, a: &[bool]) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Lit(i) => a[*i],
            Expr::All(es) => es.iter().all(|e| e.eval(a)),
            Expr::Any(es) => es.iter().any(|e| e.eval(a)),
        }
    }
}

struct Literal {
    pred: LinearPredicate<f64>,
    step: usize,
    margin: f64,
}

#[derive(Default)]
struct Expander {
    lits: Vec<Literal>,
    nodes: usize,
}

impl Expander {
    fn literal(&mut self, pred: LinearPredicate<f64>, step: usize, margin: f64) -> usize {
        let same = |l: &Literal| {
            l.step == step && l.margin == margin && l.pred.offset() == pred.offset() && l.pred.coeffs().iter().zip(pred.coeffs()).all(|(a, b)| a == b)
        };
        if let Some(i) = self.lits.iter().position(same) {
            return i;
        }
        self.lits.push(Literal { pred, step, margin });
        self.lits.len() - 1
    }

    fn expand(&mut self, phi: &Formula<f64>, k: usize, pos: bool, margin: f64) -> Result<Expr, PlanError> {
        self.nodes += 1;
        if self.nodes > MAX_EXPR_NODES {
            return Err(PlanError::TooLarge("formula expansion exceeds the reference solver's size limit".into()));
        }
        let conj = |es: Vec<Expr>| if pos { Expr::All(es) } else { Expr::Any(es) };
        let disj = |es: Vec<Expr>| if pos { Expr::Any(es) } else { Expr::All(es) };
        Ok(match phi {
            Formula::True => Expr::Const(pos),
            Formula::Pred(p) => {
                if pos {
                    Expr::Lit(self.literal(p.clone(), k, margin))
                } else {
                    Expr::Lit(self.literal(p.negated(), k, margin.max(STRICT_EPS)))
                }
            }
            Formula::Not(f) => self.expand(f, k, !pos, margin)?,
            Formula::And(fs) => conj(fs.iter().map(|f| self.expand(f, k, pos, margin)).collect::<Result<_, _>>()?),
            Formula::Or(fs) => disj(fs.iter().map(|f| self.expand(f, k, pos, margin)).collect::<Result<_, _>>()?),
            Formula::Eventually(i, f) => disj((k + i.lo()..=k + i.hi()).map(|t| self.expand(f, t, pos, margin)).collect::<Result<_, _>>()?),
            Formula::Always(i, f) => conj((k + i.lo()..=k + i.hi()).map(|t| self.expand(f, t, pos, margin)).collect::<Result<_, _>>()?),
            Formula::Until(lhs, rhs, i) => {
                let mut alts = Vec::new();
                for t in k + i.lo()..=k + i.hi() {
                    let mut parts = vec![self.expand(rhs, t, pos, margin)?];
                    for s in k..=t {
                        parts.push(self.expand(lhs, s, pos, margin)?);
                    }
                    alts.push(conj(parts));
                }
                disj(alts)
            }
        })
    }
}

/// Controls `u = (a_0, .., a_T)` determine every state affinely:
/// `x_t = c[t] + g[t] u`.
struct Condensed {
    c: Vec<DVector<f64>>,
    g: Vec<DMatrix<f64>>,
}

fn condense(prob: &PlanProblem) -> Condensed {
    let t_max = prob.horizon;
    let n = 3 * (t_max + 1);
    let roll = |u: &[Vec3]| -> Vec<DVector<f64>> {
        let (mut p, mut v) = (prob.x0.p, prob.x0.v);
        let mut out = vec![DVector::from_iterator(6, p.iter().chain(&v).copied())];
        for a in u.iter().take(t_max) {
            (p, v) = prob.model.step(p, v, *a);
            out.push(DVector::from_iterator(6, p.iter().chain(&v).copied()));
        }
        out
    };
    let zero = vec![[0.0; 3]; t_max + 1];
    let c = roll(&zero);
    let mut g = vec![DMatrix::zeros(6, n); t_max + 1];
    for j in 0..n {
        let mut u = zero.clone();
        u[j / 3][j % 3] = 1.0;
        for (t, x) in roll(&u).iter().enumerate() {
            g[t].set_column(j, &(x - &c[t]));
        }
    }
    Condensed { c, g }
}

/// `min 1/2 u'Pu + q'u  s.t.  lo <= A u <= hi`.
struct BoxQp {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

enum QpResult {
    Solved(DVector<f64>),
    Infeasible,
    Unresolved,
}

impl BoxQp {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().enumerate().map(|(i, x)| x.clamp(self.lo[i], self.hi[i])))
    }

    /// Largest violation of stationarity, primal feasibility and
    /// complementarity for the pair `(u, y)`.
    fn kkt_residual(&self, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let stat = (&self.p * u + &self.q + self.a.transpose() * y).amax();
        let au = &self.a * u;
        let mut r = stat;
        for i in 0..au.len() {
            r = r.max(self.lo[i] - au[i]).max(au[i] - self.hi[i]);
            // y > 0 only on an active upper side, y < 0 on an active lower side
            if y[i] > 0.0 {
                r = r.max(if self.hi[i].is_finite() { y[i] * (self.hi[i] - au[i]).abs() } else { y[i] });
            } else if y[i] < 0.0 {
                r = r.max(if self.lo[i].is_finite() { -y[i] * (au[i] - self.lo[i]).abs() } else { -y[i] });
            }
        }
        r
    }

    fn solve(&self) -> QpResult {
        let (n, m) = (self.p.nrows(), self.a.nrows());
        let sigma = 1e-6;
        let alpha = 1.6;
        let mut rho = 0.1;
        let ata = self.a.transpose() * &self.a;
        let factor = |rho: f64| (&self.p + DMatrix::identity(n, n) * sigma + &ata * rho).cholesky();
        let Some(mut chol) = factor(rho) else {
            return QpResult::Unresolved;
        };
        let mut x = DVector::zeros(n);
        let mut z = self.project(&DVector::zeros(m));
        let mut y = DVector::zeros(m);
        for iter in 1..=50_000 {
            let rhs = &x * sigma - &self.q + self.a.transpose() * (&z * rho - &y);
            let xt = chol.solve(&rhs);
            let zt = &self.a * &xt;
            x = &xt * alpha + &x * (1.0 - alpha);
            let zr = &zt * alpha + &z * (1.0 - alpha);
            let z_new = self.project(&(&zr + &y / rho));
            let y_prev = y.clone();
            y += (&zr - &z_new) * rho;
            z = z_new;

            let ax = &self.a * &x;
            let r_prim = (&ax - &z).amax();
            let px = &self.p * &x;
            let aty = self.a.transpose() * &y;
            let r_dual = (&px + &self.q + &aty).amax();
            if r_prim <= 1e-9 && r_dual <= 1e-9 {
                break;
            }
            let dy = &y - &y_prev;
            let dy_norm = dy.amax();
            if dy_norm > 1e-12 && (self.a.transpose() * &dy).amax() <= 1e-9 * dy_norm {
                let mut support = 0.0;
                let mut bounded = true;
                for i in 0..m {
                    if dy[i] > 1e-12 * dy_norm {
                        if self.hi[i].is_finite() {
                            support += self.hi[i] * dy[i];
                        } else {
                            bounded = false;
                        }
                    } else if dy[i] < -1e-12 * dy_norm {
                        if self.lo[i].is_finite() {
                            support += self.lo[i] * dy[i];
                        } else {
                            bounded = false;
                        }
                    }
                }
                if bounded && support < -1e-9 * dy_norm {
                    return QpResult::Infeasible;
                }
            }
            if iter % 50 == 0 {
                let prim_scale = ax.amax().max(z.amax()).max(1e-12);
                let dual_scale = px.amax().max(aty.amax()).max(self.q.amax()).max(1e-12);
                let ratio = ((r_prim / prim_scale) / (r_dual / dual_scale).max(1e-16)).sqrt();
                let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                    rho = new_rho;
                    match factor(rho) {
                        Some(c) => chol = c,
                        None => return QpResult::Unresolved,
                    }
                }
            }
        }
        let (x, y) = self.polish(&y).unwrap_or((x, y));
        if self.kkt_residual(&x, &y) <= KKT_TOL {
            QpResult::Solved(x)
        } else {
            QpResult::Unresolved
        }
    }

    /// Solves the equality-constrained QP on the active set read off the ADMM
    /// multipliers; accepted only if it is primal and dual feasible.
    fn polish(&self, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (n, m) = (self.p.nrows(), self.a.nrows());
        let tol = 1e-7;
        let mut act: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            if y[i] < -tol && self.lo[i].is_finite() {
                act.push((i, self.lo[i]));
            } else if y[i] > tol && self.hi[i].is_finite() {
                act.push((i, self.hi[i]));
            }
        }
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&self.q));
        for (r, (i, b)) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = self.a[(*i, j)];
                kkt[(j, n + r)] = self.a[(*i, j)];
            }
            rhs[n + r] = *b;
        }
        let sol = kkt.lu().solve(&rhs)?;
        let xp = sol.rows(0, n).into_owned();
        let mut yp = DVector::zeros(m);
        for (r, (i, _)) in act.iter().enumerate() {
            yp[*i] = sol[n + r];
        }
        let axp = &self.a * &xp;
        for i in 0..m {
            if axp[i] < self.lo[i] - 1e-9 || axp[i] > self.hi[i] + 1e-9 {
                return None;
            }
        }
        for (i, b) in &act {
            let lower = *b == self.lo[*i];
            if (lower && yp[*i] > 1e-9) || (!lower && yp[*i] < -1e-9) {
                return None;
            }
        }
        if !xp.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some((xp, yp))
    }
}

/// Exhaustive solve of `prob`: the ground truth for small instances.
///
/// Refuses instances with more than [`MAX_BINARIES`] distinct literals or a
/// horizon above [`MAX_STEPS`].
pub fn solve_reference(prob: &PlanProblem) -> Result<SolveResult, PlanError> {
    let start = std::time::Instant::now();
    prob.validate()?;
    let t_max = prob.horizon;
    if t_max > MAX_STEPS {
        return Err(PlanError::TooLarge(format!("horizon {t_max} exceeds {MAX_STEPS} steps")));
    }
    let mut ex = Expander::default();
    let root = ex.expand(&prob.phi, 0, true, prob.rho_margin)?;
    let lits = ex.lits;
    if lits.len() > MAX_BINARIES {
        return Err(PlanError::TooLarge(format!("{} literals exceed {MAX_BINARIES}", lits.len())));
    }

    let cd = condense(prob);
    let n = 3 * (t_max + 1);
    let md = &prob.model;
    let mut p = DMatrix::zeros(n, n);
    let mut q = DVector::zeros(n);
    let qm = DMatrix::from_fn(3, 3, |i, j| prob.q[i][j]);
    let rm = DMatrix::from_fn(3, 3, |i, j| prob.r[i][j]);
    for t in 0..=t_max {
        let gv = cd.g[t].rows(3, 3);
        let cv = cd.c[t].rows(3, 3);
        p += gv.transpose() * &qm * gv * 2.0;
        q += gv.transpose() * &qm * cv * 2.0;
        let mut blk = p.view_mut((3 * t, 3 * t), (3, 3));
        blk += &rm * 2.0;
    }

    // bounds on states 1..=T and on the controls
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for t in 1..=t_max {
        for d in 0..6 {
            let (lo, hi) = if d < 3 { (md.p_min[d], md.p_max[d]) } else { (md.v_min[d - 3], md.v_max[d - 3]) };
            let g: Vec<f64> = cd.g[t].row(d).iter().copied().collect();
            rows.push((g, lo - cd.c[t][d], hi - cd.c[t][d]));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e, md.a_min[j % 3], md.a_max[j % 3]));
    }
    // literal i as a row over u, or a constant truth value when no control reaches it
    let lit_rows: Vec<Result<(Vec<f64>, f64), bool>> = lits
        .iter()
        .map(|l| {
            let w = DVector::from_column_slice(l.pred.coeffs());
            let g: Vec<f64> = (cd.g[l.step].transpose() * &w).iter().copied().collect();
            let lo = l.margin - l.pred.offset() - w.dot(&cd.c[l.step]);
            if g.iter().all(|v| *v == 0.0) {
                Err(lo <= 0.0)
            } else {
                Ok((g, lo))
            }
        })
        .collect();

    let nl = lits.len();
    let mut assign = vec![false; nl];
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut solved = 0usize;
    let mut unresolved = 0usize;
    for mask in 0u64..(1u64 << nl) {
        for (i, a) in assign.iter_mut().enumerate() {
            *a = mask >> (nl - 1 - i) & 1 == 1;
        }
        if !root.eval(&assign) {
            continue;
        }
        let mut minimal = true;
        for i in 0..nl {
            if assign[i] {
                assign[i] = false;
                minimal &= !root.eval(&assign);
                assign[i] = true;
            }
        }
        if !minimal {
            continue;
        }
        let mut qp_rows = rows.clone();
        let mut possible = true;
        for i in (0..nl).filter(|i| assign[*i]) {
            match &lit_rows[i] {
                Ok((g, lo)) => qp_rows.push((g.clone(), *lo, f64::INFINITY)),
                Err(holds) => possible &= *holds,
            }
        }
        if !possible {
            continue;
        }
        let qp = BoxQp {
            p: p.clone(),
            q: q.clone(),
            a: DMatrix::from_fn(qp_rows.len(), n, |i, j| qp_rows[i].0[j]),
            lo: DVector::from_iterator(qp_rows.len(), qp_rows.iter().map(|r| r.1)),
            hi: DVector::from_iterator(qp_rows.len(), qp_rows.iter().map(|r| r.2)),
        };
        solved += 1;
        match qp.solve() {
            QpResult::Solved(u) => {
                let obj = 0.5 * u.dot(&(&p * &u)) + q.dot(&u);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, u));
                }
            }
            QpResult::Infeasible => {}
            QpResult::Unresolved => unresolved += 1,
        }
    }

    let mut res = match best {
        Some((_, u)) if unresolved == 0 => {
            let controls: Vec<Vec3> = (0..=t_max).map(|t| [u[3 * t], u[3 * t + 1], u[3 * t + 2]]).collect();
            certify(prob, controls, SolveStatus::Optimal, format!("optimal over {solved} literal assignments"))
        }
        None if unresolved == 0 => SolveResult::without_solution(
            SolveStatus::Infeasible,
            format!("infeasible: none of the {solved} minimal literal assignments admits a trajectory"),
        ),
        _ => SolveResult::without_solution(SolveStatus::SolverError, format!("{unresolved} of {solved} subproblems did not converge")),
    };
    res.nodes = solved;
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DroneModel, InitialState};
    use verna_core::stl::{Cuboid, Interval};

    fn model() -> DroneModel {
        DroneModel::for_workspace(&Cuboid::new([0.0; 3], [10.0, 10.0, 3.0]).unwrap())
    }

    fn xpos(c: f64) -> Formula<f64> {
        Formula::pred(LinearPredicate::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], -c).unwrap())
    }

    #[test]
    fn true_spec_is_free_motion() {
        let prob = PlanProblem::new(model(), Formula::True, 4, InitialState::at_rest([1.0; 3]));
        let r = solve_reference(&prob).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective.abs() < 1e-9);
    }

    #[test]
    fn reach_needs_effort() {
        // x >= 1.5 at step 3 from rest at 1: p3 = 1 + dt^2 (2 a0 + a1)
        let prob = PlanProblem::new(model(), xpos(1.4).eventually(Interval::new(3, 3).unwrap()), 3, InitialState::at_rest([1.0; 3]));
        let r = solve_reference(&prob).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{}", r.message);
        let p3 = r.waypoints()[3][0];
        assert!((p3 - 1.5).abs() < 1e-6, "{p3}");
    }

    #[test]
    fn contradiction_is_infeasible() {
        let phi = xpos(5.0).and(xpos(5.0).not());
        let prob = PlanProblem::new(model(), phi.always(Interval::new(0, 2).unwrap()), 2, InitialState::at_rest([1.0; 3]));
        assert_eq!(solve_reference(&prob).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn size_limits() {
        let long = PlanProblem::new(model(), Formula::True, 16, InitialState::at_rest([1.0; 3]));
        assert!(matches!(solve_reference(&long), Err(PlanError::TooLarge(_))));
        let wide = PlanProblem::new(model(), xpos(2.0).eventually(Interval::new(0, 10).unwrap()).and(xpos(3.0).eventually(Interval::new(0, 10).unwrap())), 10, InitialState::at_rest([1.0; 3]));
        assert!(matches!(solve_reference(&wide), Err(PlanError::TooLarge(_))));
    }
}

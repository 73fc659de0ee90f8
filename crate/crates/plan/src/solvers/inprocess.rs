//! Branch and bound over Clarabel relaxations with a witness-refinement
//! primal heuristic.
//!
//! The heuristic scores every predicate literal on a candidate trajectory,
//! picks a satisfying set of literals through the And/Or structure (min / max
//! of child scores), and solves the QP with exactly those literals enforced.
//! When that QP is infeasible it solves an L1-penalized version instead and
//! re-scores on the result. Literals whose rows carry large multipliers in the
//! penalized QP (violated ones, and the ones holding the trajectory back) are
//! charged a score penalty, so repeated rounds move away from a stuck choice.

use std::collections::HashSet;
use std::time::Instant;

use crate::model::{Junction, Lit, MicpModel, Sense, VarKind};
use crate::presolve::propagate;
use crate::qp::{Qp, QpOutcome};
use crate::solve::{Limits, RawSolution, SolveStatus};
use crate::solvers::SolverAdapter;

const INT_TOL: f64 = 1e-6;
const ACCEPT_TOL: f64 = 1e-6;
/// Extra margin on enforced literals so interior-point tolerances never
/// leave a literal just below its threshold.
const LITERAL_SAFETY: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct InProcessSolver {
    pub heuristic_rounds: usize,
    pub propagation_passes: usize,
}

impl Default for InProcessSolver {
    fn default() -> Self {
        InProcessSolver { heuristic_rounds: 400, propagation_passes: 30 }
    }
}

struct Clock {
    start: Instant,
    limit: f64,
}

impl Clock {
    fn left(&self) -> f64 {
        self.limit - self.start.elapsed().as_secs_f64()
    }

    fn expired(&self) -> bool {
        self.left() <= 0.0
    }
}

struct Incumbent {
    x: Vec<f64>,
    obj: f64,
}

struct Search<'a> {
    m: &'a MicpModel,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Binaries and junction indicators: everything the heuristic QP drops.
    logic_var: Vec<bool>,
    clock: Clock,
    best: Option<Incumbent>,
}

impl<'a> Search<'a> {
    fn offer(&mut self, x: Vec<f64>) -> bool {
        let (viol, integral) = self.m.check_point(&x);
        if viol > ACCEPT_TOL || !integral {
            log::debug!("rejected candidate: violation {viol:.2e}, integral {integral}");
            return false;
        }
        let obj = self.m.objective.value(&x);
        if self.best.as_ref().is_none_or(|b| obj < b.obj) {
            self.best = Some(Incumbent { x, obj });
            return true;
        }
        false
    }

    fn objective_qp(&self) -> Qp {
        Qp {
            lb: self.lb.clone(),
            ub: self.ub.clone(),
            rows: Vec::new(),
            quad: self.m.objective.quad.clone(),
            linear: self.m.objective.linear.clone(),
        }
    }

    /// QP over the trajectory variables with the given literals enforced
    /// (hard) or penalized with `weight` per unit of violation.
    fn literal_qp(&self, selected: &[usize], weight: Option<f64>) -> Qp {
        let mut qp = self.objective_qp();
        for (j, is_logic) in self.logic_var.iter().enumerate() {
            if *is_logic {
                qp.lb[j] = 0.0;
                qp.ub[j] = 0.0;
            }
        }
        for r in &self.m.rows {
            if r.coeffs.iter().all(|(j, _)| !self.logic_var[*j]) {
                qp.rows.push((r.coeffs.clone(), r.sense, r.rhs));
            }
        }
        for &l in selected {
            let leaf = &self.m.leaves[l];
            let row = &self.m.rows[leaf.row];
            let mut coeffs: Vec<(usize, f64)> = row.coeffs.iter().filter(|(j, _)| *j != leaf.var).copied().collect();
            let rhs = row.rhs + self.m.big_m + LITERAL_SAFETY;
            if let Some(w) = weight {
                let s = qp.add_var(0.0, f64::INFINITY);
                qp.linear.push((s, w));
                coeffs.push((s, 1.0));
            }
            qp.rows.push((coeffs, Sense::Ge, rhs));
        }
        qp
    }

    /// `h(x) - margin` for every leaf; `-inf` for literals presolve ruled out.
    fn leaf_scores(&self, x: &[f64]) -> Vec<f64> {
        self.m
            .leaves
            .iter()
            .map(|leaf| {
                if self.ub[leaf.var] < 0.5 {
                    return f64::NEG_INFINITY;
                }
                let row = &self.m.rows[leaf.row];
                let act: f64 = row.coeffs.iter().filter(|(j, _)| *j != leaf.var).map(|(j, c)| c * x[*j]).sum();
                act - (row.rhs + self.m.big_m)
            })
            .collect()
    }

    /// Picks a set of leaves that satisfies the root, preferring high scores.
    /// `prev` holds the Or choices of the last round; keeping them wins ties.
    fn select(&self, x: &[f64], penalty: &[f64], prev: &mut Vec<Option<usize>>) -> Vec<usize> {
        let mut leaf = self.leaf_scores(x);
        for (s, p) in leaf.iter_mut().zip(penalty) {
            *s -= p;
        }
        let mut node = vec![0.0; self.m.nodes.len()];
        let mut choice = vec![None; self.m.nodes.len()];
        let score = |l: &Lit, node: &[f64]| match l {
            Lit::True => f64::INFINITY,
            Lit::False => f64::NEG_INFINITY,
            Lit::Leaf(i) => leaf[*i],
            Lit::Node(i) => node[*i],
        };
        for (i, n) in self.m.nodes.iter().enumerate() {
            if self.ub[n.var] < 0.5 {
                node[i] = f64::NEG_INFINITY;
                continue;
            }
            match n.junction {
                Junction::And => node[i] = n.children.iter().map(|c| score(c, &node)).fold(f64::INFINITY, f64::min),
                Junction::Or => {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for (k, c) in n.children.iter().enumerate() {
                        let bonus = if prev[i] == Some(k) { 1e-3 } else { 0.0 };
                        let s = score(c, &node) + bonus;
                        if s >= best.0 {
                            best = (s, k);
                        }
                    }
                    node[i] = best.0;
                    choice[i] = Some(best.1);
                }
            }
        }
        let mut out = Vec::new();
        let mut seen_nodes = vec![false; self.m.nodes.len()];
        let mut stack: Vec<Lit> = self.m.root.into_iter().collect();
        // literals presolve proved necessary are always enforced
        for (i, l) in self.m.leaves.iter().enumerate() {
            if self.lb[l.var] > 0.5 {
                stack.push(Lit::Leaf(i));
            }
        }
        let mut seen_leaves = vec![false; self.m.leaves.len()];
        while let Some(l) = stack.pop() {
            match l {
                Lit::Leaf(i) => {
                    if !seen_leaves[i] {
                        seen_leaves[i] = true;
                        out.push(i);
                    }
                }
                Lit::Node(i) => {
                    if seen_nodes[i] {
                        continue;
                    }
                    seen_nodes[i] = true;
                    let n = &self.m.nodes[i];
                    match n.junction {
                        Junction::And => stack.extend(n.children.iter().copied()),
                        Junction::Or => stack.push(n.children[choice[i].unwrap_or(0)]),
                    }
                }
                _ => {}
            }
        }
        *prev = choice;
        out.sort_unstable();
        out
    }

    /// Full model assignment from trajectory values: leaves that hold are set,
    /// junction indicators evaluated bottom-up.
    fn complete(&self, mut x: Vec<f64>) -> Vec<f64> {
        let scores = self.leaf_scores(&x);
        let mut val = vec![0.0; self.m.leaves.len()];
        for (i, leaf) in self.m.leaves.iter().enumerate() {
            let on = scores[i] >= -1e-9 && self.ub[leaf.var] > 0.5;
            val[i] = if on { 1.0 } else { 0.0 };
            x[leaf.var] = val[i];
        }
        let mut node = vec![0.0; self.m.nodes.len()];
        for (i, n) in self.m.nodes.iter().enumerate() {
            let vals = n.children.iter().map(|c| match c {
                Lit::True => 1.0,
                Lit::False => 0.0,
                Lit::Leaf(k) => val[*k],
                Lit::Node(k) => node[*k],
            });
            node[i] = match n.junction {
                Junction::And => vals.fold(1.0, f64::min),
                Junction::Or => vals.fold(0.0, f64::max),
            };
            x[n.var] = node[i];
        }
        x
    }

    fn try_selection(&mut self, selected: &[usize]) -> Result<bool, QpOutcome> {
        match self.literal_qp(selected, None).solve(self.clock.left()) {
            QpOutcome::Solved { x, .. } => {
                let n = self.m.vars.len();
                let full = self.complete(x[..n].to_vec());
                Ok(self.offer(full))
            }
            other => Err(other),
        }
    }

    fn heuristic(&mut self, rounds: usize) {
        if self.m.leaves.is_empty() || self.m.root.is_none() {
            return;
        }
        let n = self.m.vars.len();
        let mut x = match self.literal_qp(&[], None).solve(self.clock.left()) {
            QpOutcome::Solved { x, .. } => x,
            o => {
                log::debug!("heuristic: unconstrained QP ended with {o:?}");
                return;
            }
        };
        let mut prev = vec![None; self.m.nodes.len()];
        let mut penalty = vec![0.0; self.m.leaves.len()];
        let mut weight = 10.0;
        let mut tried: HashSet<Vec<usize>> = HashSet::new();
        let mut feasible_rounds = 0;
        for round in 0..rounds {
            if self.clock.expired() {
                return;
            }
            let sel = self.select(&x[..n], &penalty, &mut prev);
            let fresh = tried.insert(sel.clone());
            if fresh {
                match self.try_selection(&sel) {
                    Ok(improved) => {
                        feasible_rounds += 1;
                        log::debug!("heuristic round {round}: feasible selection, improved {improved}");
                        if !improved || feasible_rounds >= 3 {
                            return;
                        }
                        x = self.best.as_ref().map(|b| b.x.clone()).unwrap();
                        continue;
                    }
                    Err(QpOutcome::TimedOut) => return,
                    Err(_) => {}
                }
            } else if self.best.is_some() {
                return;
            }
            let soft_qp = self.literal_qp(&sel, Some(weight));
            let base_rows = soft_qp.rows.len() - sel.len();
            match soft_qp.solve(self.clock.left()) {
                QpOutcome::Solved { x: soft, duals } => {
                    x = soft;
                    // multipliers are at most `weight`; a violated literal pays 1 per round
                    for (k, &l) in sel.iter().enumerate() {
                        penalty[l] += duals[base_rows + k] / weight;
                    }
                }
                o => {
                    log::debug!("heuristic round {round}: penalized QP ended with {o:?}");
                    return;
                }
            }
            weight = (weight * 2.0).min(1e4);
        }
    }

    fn relaxation(&self, lb: &[f64], ub: &[f64]) -> Qp {
        let mut qp = self.objective_qp();
        qp.lb = lb.to_vec();
        qp.ub = ub.to_vec();
        qp.rows = self.m.rows.iter().map(|r| (r.coeffs.clone(), r.sense, r.rhs)).collect();
        qp
    }
}

enum Outcome {
    Exhausted,
    LimitHit,
}

impl InProcessSolver {
    fn branch_and_bound(&self, s: &mut Search, limits: &Limits) -> (Outcome, usize, usize) {
        let binaries: Vec<usize> = s.m.binary_vars().map(|(j, _)| j).collect();
        let mut stack = vec![(s.lb.clone(), s.ub.clone())];
        let mut nodes = 0;
        let mut failures = 0;
        while let Some((mut lb, mut ub)) = stack.pop() {
            if s.clock.expired() || limits.node_limit.is_some_and(|n| nodes >= n) {
                return (Outcome::LimitHit, nodes, failures);
            }
            nodes += 1;
            if propagate(s.m, &mut lb, &mut ub, 5).is_err() {
                continue;
            }
            let x = match s.relaxation(&lb, &ub).solve(s.clock.left()) {
                QpOutcome::Solved { x, .. } => x,
                QpOutcome::Infeasible(why) => {
                    log::trace!("node {nodes} pruned: {why}");
                    continue;
                }
                QpOutcome::TimedOut => return (Outcome::LimitHit, nodes, failures),
                QpOutcome::Failed(msg) => {
                    log::debug!("relaxation failed: {msg}");
                    failures += 1;
                    continue;
                }
            };
            let bound = s.m.objective.value(&x);
            if let Some(b) = &s.best {
                if bound >= b.obj - limits.gap * b.obj.abs().max(1.0) {
                    continue;
                }
            }
            let mut branch = None;
            let mut worst = INT_TOL;
            for &j in &binaries {
                if ub[j] - lb[j] > 0.5 {
                    let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
                    if f > worst {
                        worst = f;
                        branch = Some(j);
                    }
                }
            }
            match branch {
                None => {
                    for &j in &binaries {
                        lb[j] = x[j].round();
                        ub[j] = lb[j];
                    }
                    match s.relaxation(&lb, &ub).solve(s.clock.left()) {
                        QpOutcome::Solved { x, .. } => {
                            s.offer(x);
                        }
                        QpOutcome::TimedOut => return (Outcome::LimitHit, nodes, failures),
                        _ => failures += 1,
                    }
                }
                Some(j) => {
                    let (mut dlb, mut dub) = (lb.clone(), ub.clone());
                    dlb[j] = 0.0;
                    dub[j] = 0.0;
                    stack.push((dlb, dub));
                    lb[j] = 1.0;
                    ub[j] = 1.0;
                    stack.push((lb, ub));
                }
            }
        }
        (Outcome::Exhausted, nodes, failures)
    }
}

impl SolverAdapter for InProcessSolver {
    fn name(&self) -> String {
        "in-process branch and bound (clarabel relaxations)".into()
    }

    fn solve_model(&mut self, m: &MicpModel, limits: &Limits) -> RawSolution {
        let clock = Clock { start: Instant::now(), limit: limits.time_s };
        let mut lb: Vec<f64> = m.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = m.vars.iter().map(|v| v.ub).collect();
        if let Err(msg) = propagate(m, &mut lb, &mut ub, self.propagation_passes) {
            return RawSolution::failed(
                SolveStatus::Infeasible,
                format!("infeasible: the specification cannot be met within the position, velocity and acceleration limits ({msg})"),
            );
        }
        if clock.expired() {
            return RawSolution::failed(SolveStatus::Timeout, "time limit reached before a feasible trajectory was found");
        }
        let mut logic_var = vec![false; m.vars.len()];
        for (j, v) in m.vars.iter().enumerate() {
            logic_var[j] = v.kind == VarKind::Binary;
        }
        for n in &m.nodes {
            logic_var[n.var] = true;
        }
        let mut s = Search { m, lb, ub, logic_var, clock, best: None };
        s.heuristic(self.heuristic_rounds);
        let (outcome, nodes, failures) = self.branch_and_bound(&mut s, limits);
        let best = s.best.take();
        let (status, message) = match (outcome, &best) {
            (Outcome::Exhausted, Some(_)) if failures == 0 => (SolveStatus::Optimal, "optimal".to_string()),
            (Outcome::Exhausted, None) if failures == 0 => (
                SolveStatus::Infeasible,
                "infeasible: no trajectory within the position, velocity and acceleration limits satisfies the specification".to_string(),
            ),
            (_, Some(_)) => (SolveStatus::Feasible, format!("search stopped after {nodes} nodes with a feasible trajectory")),
            (Outcome::LimitHit, None) => (SolveStatus::Timeout, format!("limit reached after {nodes} nodes without a feasible trajectory")),
            (Outcome::Exhausted, None) => (SolveStatus::SolverError, format!("{failures} relaxations failed numerically")),
        };
        RawSolution { status, values: best.map(|b| b.x), message, nodes }
    }
}

//! Solving an encoded model and decoding the result.

use serde::{Deserialize, Serialize};
use verna_core::stl::{robustness, satisfied, Trajectory};

use crate::dynamics::{cost, rollout, PlanProblem, Vec3};
use crate::model::MicpModel;
use crate::solvers::SolverAdapter;

/// Search limits. `node_limit` bounds branch-and-bound work independently of
/// the machine, which keeps runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub time_s: f64,
    pub gap: f64,
    pub node_limit: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { time_s: 120.0, gap: 1e-6, node_limit: Some(200) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
    SolverError,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

/// What an adapter hands back: status plus one value per model variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub message: String,
    pub nodes: usize,
}

impl RawSolution {
    pub fn failed(status: SolveStatus, message: impl Into<String>) -> Self {
        RawSolution { status, values: None, message: message.into(), nodes: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub trajectory: Option<Trajectory<f64>>,
    /// `a_0 .. a_T`.
    pub controls: Vec<Vec3>,
    pub objective: f64,
    pub robustness: f64,
    /// Solver flag text for infeasible or failed solves.
    pub message: String,
    pub nodes: usize,
    pub wall_time_s: f64,
}

impl SolveResult {
    pub fn without_solution(status: SolveStatus, message: impl Into<String>) -> Self {
        SolveResult {
            status,
            trajectory: None,
            controls: Vec::new(),
            objective: f64::NAN,
            robustness: f64::NAN,
            message: message.into(),
            nodes: 0,
            wall_time_s: 0.0,
        }
    }

    /// Positions of the planned trajectory.
    pub fn waypoints(&self) -> Vec<Vec3> {
        self.trajectory.as_ref().map(|t| t.states().map(|s| [s[0], s[1], s[2]]).collect()).unwrap_or_default()
    }
}

/// Rolls the controls out and re-checks the specification; any disagreement
/// with the solver's claim turns into `SolverError`.
pub fn certify(prob: &PlanProblem, controls: Vec<Vec3>, status: SolveStatus, message: String) -> SolveResult {
    let t = prob.horizon;
    let traj = rollout(&prob.model, prob.x0, &controls[..t]);
    let objective = cost(&traj, &controls, &prob.q, &prob.r).unwrap_or(f64::NAN);
    let rho = robustness(&prob.phi, &traj, 0).unwrap_or(f64::NEG_INFINITY);
    let sat = satisfied(&prob.phi, &traj, 0).unwrap_or(false);
    let ok = sat && rho >= prob.rho_margin - 1e-6;
    SolveResult {
        status: if ok { status } else { SolveStatus::SolverError },
        trajectory: Some(traj),
        controls,
        objective,
        robustness: rho,
        message: if ok { message } else { format!("solver returned a trajectory that violates the specification (robustness {rho:.3e})") },
        nodes: 0,
        wall_time_s: 0.0,
    }
}

/// Solves `m` with `adapter`, then decodes and certifies the trajectory.
pub fn solve(m: &MicpModel, adapter: &mut dyn SolverAdapter, limits: &Limits) -> SolveResult {
    let start = std::time::Instant::now();
    let Some(prob) = m.source.as_deref() else {
        return SolveResult::without_solution(SolveStatus::SolverError, "model carries no planning problem to decode against");
    };
    let raw = adapter.solve_model(m, limits);
    let mut res = match (raw.status.has_solution(), raw.values) {
        (true, Some(x)) if x.len() == m.vars.len() => {
            let controls = m.layout.a.iter().map(|ix| [x[ix[0]], x[ix[1]], x[ix[2]]]).collect();
            certify(prob, controls, raw.status, raw.message)
        }
        (true, _) => SolveResult::without_solution(SolveStatus::SolverError, "solver reported a solution without values for every variable"),
        (false, _) => SolveResult::without_solution(raw.status, raw.message),
    };
    res.nodes = raw.nodes;
    res.wall_time_s = start.elapsed().as_secs_f64();
    res
}

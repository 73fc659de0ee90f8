//! Discrete double integrator, quadratic cost and the planning problem.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use verna_core::stl::{Cuboid, Formula, Trajectory};

use crate::PlanError;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// `p[t+1] = p[t] + dt v[t]`, `v[t+1] = v[t] + dt a[t]` with box limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneModel {
    pub dt: f64,
    pub p_min: Vec3,
    pub p_max: Vec3,
    pub v_min: Vec3,
    pub v_max: Vec3,
    pub a_min: Vec3,
    pub a_max: Vec3,
}

impl DroneModel {
    pub const DEFAULT_DT: f64 = 0.5;
    pub const DEFAULT_V: f64 = 2.0;
    pub const DEFAULT_A: f64 = 2.0;

    /// Default limits with positions bounded by `workspace`.
    pub fn for_workspace(workspace: &Cuboid<f64>) -> Self {
        let v = Self::DEFAULT_V;
        let a = Self::DEFAULT_A;
        DroneModel {
            dt: Self::DEFAULT_DT,
            p_min: workspace.min(),
            p_max: workspace.max(),
            v_min: [-v; 3],
            v_max: [v; 3],
            a_min: [-a; 3],
            a_max: [a; 3],
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(PlanError::InvalidModel(format!("dt must be positive, got {}", self.dt)));
        }
        for (what, lo, hi) in [("p", self.p_min, self.p_max), ("v", self.v_min, self.v_max), ("a", self.a_min, self.a_max)] {
            for d in 0..3 {
                if !(lo[d].is_finite() && hi[d].is_finite() && lo[d] < hi[d]) {
                    return Err(PlanError::InvalidModel(format!("{what} bounds on axis {d} must satisfy min < max")));
                }
            }
        }
        Ok(())
    }

    pub fn workspace_diagonal(&self) -> f64 {
        (0..3).map(|d| (self.p_max[d] - self.p_min[d]).powi(2)).sum::<f64>().sqrt()
    }

    /// Next state under control `a`.
    pub fn step(&self, p: Vec3, v: Vec3, a: Vec3) -> (Vec3, Vec3) {
        let dt = self.dt;
        ([p[0] + dt * v[0], p[1] + dt * v[1], p[2] + dt * v[2]], [v[0] + dt * a[0], v[1] + dt * a[1], v[2] + dt * a[2]])
    }
}

/// Initial position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub p: Vec3,
    pub v: Vec3,
}

impl InitialState {
    pub fn at_rest(p: Vec3) -> Self {
        InitialState { p, v: [0.0; 3] }
    }
}

/// Applies `controls` from `x0`: T controls give T + 1 states `[p, v]`.
pub fn rollout(model: &DroneModel, x0: InitialState, controls: &[Vec3]) -> Trajectory<f64> {
    let (mut p, mut v) = (x0.p, x0.v);
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(vec![p[0], p[1], p[2], v[0], v[1], v[2]]);
    for a in controls {
        (p, v) = model.step(p, v, *a);
        states.push(vec![p[0], p[1], p[2], v[0], v[1], v[2]]);
    }
    Trajectory::new(states, model.dt).expect("finite rollout")
}

fn quad(m: &Mat3, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += x[i] * m[i][j] * x[j];
        }
    }
    s
}

/// `sum over t = 0..=T of v_t' Q v_t + a_t' R a_t`; `controls` must hold one
/// entry per state (the last one is `a_T`).
pub fn cost(traj: &Trajectory<f64>, controls: &[Vec3], q: &Mat3, r: &Mat3) -> Result<f64, PlanError> {
    if traj.dim() != 6 {
        return Err(PlanError::DimensionMismatch { expected: 6, found: traj.dim() });
    }
    if controls.len() != traj.len() {
        return Err(PlanError::DimensionMismatch { expected: traj.len(), found: controls.len() });
    }
    Ok(traj.states().zip(controls).map(|(s, a)| quad(q, &s[3..6]) + quad(r, a)).sum())
}

fn check_psd(name: &str, m: &Mat3) -> Result<(), PlanError> {
    let mut sym = true;
    for i in 0..3 {
        for j in 0..3 {
            if !m[i][j].is_finite() || (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                sym = false;
            }
        }
    }
    if !sym {
        return Err(PlanError::InvalidWeights(format!("{name} must be symmetric")));
    }
    let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| m[i][j]));
    let scale = 1.0 + eig.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if eig.eigenvalues.iter().any(|e| *e < -1e-12 * scale) {
        return Err(PlanError::InvalidWeights(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

/// One planning instance: dynamics, specification, horizon, weights, margin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanProblem {
    pub model: DroneModel,
    pub phi: Formula<f64>,
    pub horizon: usize,
    pub x0: InitialState,
    pub q: Mat3,
    pub r: Mat3,
    pub rho_margin: f64,
}

impl PlanProblem {
    pub const DEFAULT_HORIZON: usize = 50;
    pub const DEFAULT_MARGIN: f64 = 0.1;

    /// Problem with identity weights and the default margin.
    pub fn new(model: DroneModel, phi: Formula<f64>, horizon: usize, x0: InitialState) -> Self {
        PlanProblem { model, phi, horizon, x0, q: IDENTITY, r: IDENTITY, rho_margin: Self::DEFAULT_MARGIN }
    }

    /// Horizon long enough for `phi`: at least `min_horizon` steps.
    pub fn fitted(model: DroneModel, phi: Formula<f64>, min_horizon: usize, x0: InitialState) -> Self {
        let t = min_horizon.max(phi.horizon());
        Self::new(model, phi, t, x0)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        self.model.validate()?;
        let need = self.phi.horizon();
        if need > self.horizon {
            return Err(PlanError::HorizonExceeded { needed: need, available: self.horizon });
        }
        let mut dim_err = None;
        self.phi.for_each_predicate(&mut |p| {
            if p.dim() != 6 {
                dim_err = Some(p.dim());
            }
        });
        if let Some(found) = dim_err {
            return Err(PlanError::DimensionMismatch { expected: 6, found });
        }
        let m = &self.model;
        for d in 0..3 {
            let p = self.x0.p[d];
            let v = self.x0.v[d];
            if !(m.p_min[d] <= p && p <= m.p_max[d]) || !(m.v_min[d] <= v && v <= m.v_max[d]) {
                return Err(PlanError::InvalidModel("initial state outside the model bounds".into()));
            }
        }
        if !(self.rho_margin.is_finite() && self.rho_margin >= 0.0) {
            return Err(PlanError::InvalidModel(format!("rho_margin must be >= 0, got {}", self.rho_margin)));
        }
        check_psd("Q", &self.q)?;
        check_psd("R", &self.r)
    }
}

//! Trajectory synthesis for STL specifications over a discrete double
//! integrator: big-M encoding into a mixed-integer convex program, LP/MPS
//! emission, an in-process branch-and-bound solver, an external-solver
//! adapter and a brute-force reference solver for testing.

pub mod dynamics;
pub mod emit;
pub mod encode;
pub mod model;
mod presolve;
mod qp;
pub mod reference;
pub mod solve;
pub mod solvers;

use thiserror::Error;

pub use dynamics::{cost, rollout, DroneModel, InitialState, Mat3, PlanProblem, Vec3, IDENTITY};
pub use emit::{emit_model, ModelFormat};
pub use encode::encode;
pub use model::MicpModel;
pub use reference::solve_reference;
pub use solve::{solve, Limits, SolveResult, SolveStatus};
pub use solvers::{ExternalSolver, InProcessSolver, SolverAdapter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("formula needs {needed} steps but the horizon is {available}")]
    HorizonExceeded { needed: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("big-M {big_m} does not dominate a predicate (needs {needed})")]
    BigMTooSmall { big_m: f64, needed: f64 },
    #[error("unsupported by this format: {0}")]
    UnsupportedFeature(String),
    #[error("instance too large for the reference solver: {0}")]
    TooLarge(String),
    #[error("solver configuration: {0}")]
    Config(String),
}

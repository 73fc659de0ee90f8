//! Solver adapters.

mod external;
mod inprocess;

pub use external::{ExternalSolver, SolutionFormat};
pub use inprocess::InProcessSolver;

use crate::model::MicpModel;
use crate::solve::{Limits, RawSolution};

/// Anything that can turn a model into variable values. Instances are not
/// shared between concurrent solves.
pub trait SolverAdapter {
    fn name(&self) -> String;
    fn solve_model(&mut self, model: &MicpModel, limits: &Limits) -> RawSolution;
}

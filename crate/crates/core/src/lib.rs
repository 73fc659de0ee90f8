//! Signal temporal logic, the STL mini-language and scene model of the verna
//! natural-language drone planner.
//!
//! The semantics in [`stl`] are generic over the scalar type ([`Scalar`]:
//! `f32` or `f64`); the aliases below fix `f64`, which everything downstream
//! of the parser uses.

pub mod dsl;
pub mod scalar;
pub mod scene;
pub mod stl;

pub use scalar::Scalar;
pub use scene::{Scene, SceneObject};
pub use stl::{robustness, satisfied, Interval, PosDims, StlError};

pub type Formula = stl::Formula<f64>;
pub type LinearPredicate = stl::LinearPredicate<f64>;
pub type Trajectory = stl::Trajectory<f64>;
pub type Cuboid = stl::Cuboid<f64>;

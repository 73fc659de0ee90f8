//! Waypoint following on the double integrator, goal-reaching and collision
//! metrics, and the multi-trial experiment runner.

pub mod experiment;
pub mod follower;
pub mod metrics;

pub use experiment::{default_task, experiment, ExperimentConfig, Rate, SuccessTable, Summary, TrialResult};
pub use follower::{follow, follow_from, resample, Flight, FollowerConfig, SwitchRule};
pub use metrics::{densify, evaluate, evaluate_targets, RunMetrics, Targets};

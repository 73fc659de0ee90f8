//! Scripted replies bundled with the crate.

use std::path::PathBuf;

use crate::backend::ScriptedBackend;

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        pub const NAMES: &[&str] = &[$($name),*];

        /// JSON text of a bundled fixture.
        pub fn bundled(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../fixtures/", $name, ".json"))),)*
                _ => None,
            }
        }
    };
}

bundle!(
    "reach_avoid_happy",
    "treasure_hunt_happy",
    "loop2_infeasible",
    "loop2_syntax",
    "loop3_advice",
    "cap_exhaustion",
    "syntax_cap_exhaustion",
    "one_shot_question",
    "demo_reject",
    "conventional_success",
    "conventional_goal_miss",
    "conventional_collision",
);

/// Replay backend for a bundled fixture.
pub fn scripted(name: &str) -> Option<ScriptedBackend> {
    bundled(name).map(|text| ScriptedBackend::from_json(name, text).expect("bundled fixtures are valid"))
}

/// On-disk location of the bundled fixtures, for `--backend scripted:FILE`.
pub fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

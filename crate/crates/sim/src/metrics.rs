//! Success metrics of a flown or planned path.

use serde::{Deserialize, Serialize};
use verna_core::scene::{Scene, SceneError};
use verna_core::{robustness, Formula, Trajectory};
use verna_plan::Vec3;

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub goal_reached: bool,
    pub collision_free: bool,
    /// Robustness of the session's specification, when one is given.
    pub final_robustness: Option<f64>,
    /// Whether first entries follow the sequencing order, when one is given.
    pub subtask_order_ok: Option<bool>,
    pub dense_trajectory: Trajectory,
    /// First step inside each goal, in `goal_names` order.
    pub first_entries: Vec<Option<usize>>,
    /// First step inside an obstacle that still exists at that step.
    pub first_collision: Option<(String, usize)>,
}

/// Names to score against; usually taken from the scene's mission.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub goals: Vec<String>,
    pub obstacles: Vec<String>,
    pub sequencing: Option<Vec<String>>,
}

impl Targets {
    pub fn from_scene(scene: &Scene) -> Self {
        let m = scene.mission();
        Targets { goals: m.goals, obstacles: m.obstacles, sequencing: (!m.sequence.is_empty()).then_some(m.sequence) }
    }
}

fn first_inside(scene: &Scene, name: &str, pos: &[Vec3]) -> Option<usize> {
    let o = scene.object(name)?;
    pos.iter().position(|p| o.contains(*p))
}

/// Goal entry at any step (in order when `sequencing` is given) and no step
/// inside an obstacle. Objects removed by the scene's unlock rule stop
/// counting as obstacles from the first step inside the trigger object.
pub fn evaluate(
    traj: &Trajectory,
    scene: &Scene,
    goal_names: &[&str],
    obstacle_names: &[&str],
    sequencing: Option<&[&str]>,
    phi: Option<&Formula>,
) -> Result<RunMetrics, SceneError> {
    let all = goal_names.iter().chain(obstacle_names).chain(sequencing.unwrap_or_default());
    for n in all {
        if scene.object(n).is_none() {
            return Err(SceneError::UnknownObject(n.to_string()));
        }
    }
    let pos: Vec<Vec3> = traj.states().map(|s| [s[0], s[1], s[2]]).collect();
    let first_entries: Vec<Option<usize>> = goal_names.iter().map(|g| first_inside(scene, g, &pos)).collect();

    let subtask_order_ok = sequencing.map(|seq| {
        let firsts: Vec<Option<usize>> = seq.iter().map(|n| first_inside(scene, n, &pos)).collect();
        firsts.iter().all(Option::is_some) && firsts.windows(2).all(|w| w[0] < w[1])
    });
    let goal_reached = first_entries.iter().all(Option::is_some) && subtask_order_ok.unwrap_or(true);

    let (unlock_at, removed) = match scene.mission().unlock {
        Some(u) => (first_inside(scene, &u.trigger, &pos), u.removes),
        None => (None, Vec::new()),
    };
    let mut first_collision = None;
    'steps: for (k, p) in pos.iter().enumerate() {
        for name in obstacle_names {
            let gone = unlock_at.is_some_and(|t| k >= t) && removed.iter().any(|r| r == name);
            if !gone && scene.object(name).is_some_and(|o| o.contains(*p)) {
                first_collision = Some((name.to_string(), k));
                break 'steps;
            }
        }
    }
    let final_robustness = match phi {
        Some(f) if traj.dim() == 6 => robustness(f, traj, 0).ok(),
        _ => None,
    };
    Ok(RunMetrics {
        goal_reached,
        collision_free: first_collision.is_none(),
        final_robustness,
        subtask_order_ok,
        dense_trajectory: traj.clone(),
        first_entries,
        first_collision,
    })
}

/// [`evaluate`] with the names of `targets`.
pub fn evaluate_targets(traj: &Trajectory, scene: &Scene, targets: &Targets, phi: Option<&Formula>) -> Result<RunMetrics, SceneError> {
    let goals: Vec<&str> = targets.goals.iter().map(String::as_str).collect();
    let obstacles: Vec<&str> = targets.obstacles.iter().map(String::as_str).collect();
    let seq: Option<Vec<&str>> = targets.sequencing.as_ref().map(|s| s.iter().map(String::as_str).collect());
    evaluate(traj, scene, &goals, &obstacles, seq.as_deref(), phi)
}

/// Polyline through `points` with no gap longer than `spacing`.
pub fn densify(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let len = (0..3).map(|d| (w[1][d] - w[0][d]).powi(2)).sum::<f64>().sqrt();
        let n = ((len / spacing).ceil() as usize).max(1);
        for i in 0..n {
            let f = i as f64 / n as f64;
            out.push(std::array::from_fn(|d| w[0][d] + f * (w[1][d] - w[0][d])));
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

/// Position-only trajectory (states `[x, y, z]`).
pub fn path_trajectory(points: &[Vec3], dt: f64) -> Trajectory {
    Trajectory::new(points.iter().map(|p| p.to_vec()).collect(), dt).expect("finite path")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densify_bounds_the_gaps() {
        let d = densify(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.25, 0.0]], 0.3);
        assert_eq!(d.len(), 4 + 1 + 1);
        assert_eq!(d.first(), Some(&[0.0, 0.0, 0.0]));
        assert_eq!(d.last(), Some(&[1.0, 0.25, 0.0]));
        assert_eq!(densify(&[[1.0, 2.0, 3.0]], 0.1), vec![[1.0, 2.0, 3.0]]);
    }
}

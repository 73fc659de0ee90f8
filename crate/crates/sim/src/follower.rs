//! PD waypoint follower on the double integrator.

use serde::{Deserialize, Serialize};
use verna_core::Trajectory;
use verna_plan::{rollout, DroneModel, InitialState, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchRule {
    /// The target moves to the next waypoint every control tick.
    PerTick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub control_hz: f64,
    pub kp: Vec3,
    pub kd: Vec3,
    pub switch_rule: SwitchRule,
    /// Time spent on the last waypoint after the sequence ends.
    pub settle_s: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig { control_hz: 10.0, kp: [4.0; 3], kd: [4.0; 3], switch_rule: SwitchRule::PerTick, settle_s: 5.0 }
    }
}

impl FollowerConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.control_hz
    }
}

/// Dense trajectory with the accelerations that produced it.
#[derive(Debug, Clone)]
pub struct Flight {
    pub trajectory: Trajectory,
    pub controls: Vec<Vec3>,
}

/// Follows `waypoints` from rest at the first waypoint.
pub fn follow(waypoints: &[Vec3], model: &DroneModel, cfg: &FollowerConfig) -> Trajectory {
    follow_from(InitialState::at_rest(waypoints[0]), waypoints, model, cfg).trajectory
}

/// Simulates `a = kp (target - p) - kd v`, clipped to the model's
/// acceleration limits, at the control rate. Tick `k` targets waypoint
/// `min(k, n - 1)`; the run lasts `n` ticks plus the settle time.
pub fn follow_from(x0: InitialState, waypoints: &[Vec3], model: &DroneModel, cfg: &FollowerConfig) -> Flight {
    assert!(!waypoints.is_empty(), "follow needs at least one waypoint");
    let tick = DroneModel { dt: cfg.period(), ..model.clone() };
    let n = waypoints.len();
    let ticks = n + (cfg.settle_s * cfg.control_hz).round() as usize;
    let (mut p, mut v) = (x0.p, x0.v);
    let mut controls = Vec::with_capacity(ticks);
    for k in 0..ticks {
        let target = waypoints[k.min(n - 1)];
        let a: Vec3 = std::array::from_fn(|d| (cfg.kp[d] * (target[d] - p[d]) - cfg.kd[d] * v[d]).clamp(model.a_min[d], model.a_max[d]));
        (p, v) = tick.step(p, v, a);
        controls.push(a);
    }
    Flight { trajectory: rollout(&tick, x0, &controls), controls }
}

/// Positions of `traj` linearly interpolated onto a grid of step `to_dt`.
pub fn resample(traj: &Trajectory, to_dt: f64) -> Vec<Vec3> {
    let from_dt = traj.dt();
    let pos: Vec<Vec3> = traj.states().map(|s| [s[0], s[1], s[2]]).collect();
    let end = traj.last_step() as f64 * from_dt;
    let count = (end / to_dt + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| {
            let t = i as f64 * to_dt / from_dt;
            let k = (t.floor() as usize).min(pos.len() - 1);
            let f = t - k as f64;
            if k + 1 >= pos.len() || f <= 0.0 {
                pos[k]
            } else {
                std::array::from_fn(|d| pos[k][d] + f * (pos[k + 1][d] - pos[k][d]))
            }
        })
        .collect()
}

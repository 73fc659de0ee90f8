//! Multi-trial experiments: fresh session per trial, bounded worker pool,
//! JSON results and per-trial trajectory files.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use verna_agents::{run_conventional, run_pipeline, AgentConfigs, Caps, Llm, LlmBackend, Mode, PlanOutcome, Planner, PlannerKind, SessionState};
use verna_core::scene::Scene;
use verna_core::Trajectory;

use crate::follower::{follow, resample, FollowerConfig};
use crate::metrics::{densify, evaluate_targets, path_trajectory, Targets};

pub const REACH_AVOID_TASK: &str = "Reach the goal while avoiding all obstacles.";
pub const TREASURE_HUNT_TASK: &str = "Go to the key in the first 30 seconds, then go to the chest. Avoid all walls and stay in the room at all times. The door will open when you reach the key.";

/// The command used for a bundled scenario.
pub fn default_task(scenario_id: &str) -> Option<&'static str> {
    match scenario_id {
        "reach_avoid" => Some(REACH_AVOID_TASK),
        "treasure_hunt" => Some(TREASURE_HUNT_TASK),
        _ => None,
    }
}

/// Spacing used to turn baseline waypoint lists into scored paths.
pub const PATH_SPACING: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene: Scene,
    pub task: String,
    pub planner_kind: PlannerKind,
    pub n_trials: usize,
    /// One seed per trial; missing entries are filled with the trial index.
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub caps: Caps,
    pub agents: AgentConfigs,
    pub planner: Planner,
    pub follower: FollowerConfig,
    /// Where results and trajectories go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scene: Scene, planner_kind: PlannerKind, n_trials: usize) -> Self {
        let task = default_task(&scene.scenario_id).unwrap_or("").to_string();
        ExperimentConfig {
            scene,
            task,
            planner_kind,
            n_trials,
            seeds: Vec::new(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            caps: Caps::default(),
            agents: AgentConfigs::default(),
            planner: Planner::in_process(),
            follower: FollowerConfig::default(),
            out_dir: None,
        }
    }

    fn seed(&self, i: usize) -> u64 {
        self.seeds.get(i).copied().unwrap_or(i as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub accepted: bool,
    /// Scored on the planned path: optimizer samples, or the baseline's
    /// waypoint polyline.
    pub goal_reached: bool,
    pub collision_free: bool,
    pub robustness: Option<f64>,
    pub wall_time_s: f64,
    pub subtask_order_ok: Option<bool>,
    /// The same metrics on the PD follower's flight.
    pub flown_goal_reached: Option<bool>,
    pub flown_collision_free: Option<bool>,
    pub outcome: String,
    pub loop_counters: [usize; 3],
    pub error: Option<String>,
}

impl TrialResult {
    fn unsuccessful(seed: u64, outcome: &str, error: Option<String>, wall_time_s: f64) -> Self {
        TrialResult {
            seed,
            accepted: false,
            goal_reached: false,
            collision_free: false,
            robustness: None,
            wall_time_s,
            subtask_order_ok: None,
            flown_goal_reached: None,
            flown_collision_free: None,
            outcome: outcome.to_string(),
            loop_counters: [0; 3],
            error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub count: usize,
    pub total: usize,
    pub percent: f64,
}

impl Rate {
    fn of(count: usize, total: usize) -> Self {
        Rate { count, total, percent: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 } }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.0}% ({}/{})", self.percent, self.count, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accepted: Rate,
    pub goal_reaching: Rate,
    pub collision_free: Rate,
    pub subtask_order_ok: Option<Rate>,
    pub flown_goal_reaching: Rate,
    pub flown_collision_free: Rate,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub scenario: String,
    pub planner_kind: PlannerKind,
    pub n_trials: usize,
    pub per_trial: Vec<TrialResult>,
    pub summary: Summary,
}

impl SuccessTable {
    fn new(scenario: String, planner_kind: PlannerKind, per_trial: Vec<TrialResult>, wall_time_s: f64) -> Self {
        let n = per_trial.len();
        let count = |f: &dyn Fn(&TrialResult) -> bool| per_trial.iter().filter(|t| f(t)).count();
        let ordered = per_trial.iter().any(|t| t.subtask_order_ok.is_some()).then(|| Rate::of(count(&|t| t.subtask_order_ok == Some(true)), n));
        let summary = Summary {
            accepted: Rate::of(count(&|t| t.accepted), n),
            goal_reaching: Rate::of(count(&|t| t.goal_reached), n),
            collision_free: Rate::of(count(&|t| t.collision_free), n),
            subtask_order_ok: ordered,
            flown_goal_reaching: Rate::of(count(&|t| t.flown_goal_reached == Some(true)), n),
            flown_collision_free: Rate::of(count(&|t| t.flown_collision_free == Some(true)), n),
            wall_time_s,
        };
        SuccessTable { scenario, planner_kind, n_trials: n, per_trial, summary }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Rows `[t, x, y, z, vx, vy, vz]`; position-only paths get finite-difference
/// velocities.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<[f64; 7]> {
    let dt = traj.dt();
    let states: Vec<&[f64]> = traj.states().collect();
    (0..states.len())
        .map(|k| {
            let s = states[k];
            let v: [f64; 3] = if s.len() >= 6 {
                [s[3], s[4], s[5]]
            } else if k + 1 < states.len() {
                std::array::from_fn(|d| (states[k + 1][d] - s[d]) / dt)
            } else {
                [0.0; 3]
            };
            [k as f64 * dt, s[0], s[1], s[2], v[0], v[1], v[2]]
        })
        .collect()
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let text = serde_json::to_string(&trajectory_rows(traj)).expect("rows serialize");
    std::fs::write(path, text)
}

struct TrialArtifacts {
    planned: Option<Trajectory>,
    flown: Option<Trajectory>,
    transcript: serde_json::Value,
}

fn run_trial(cfg: &ExperimentConfig, backend: &dyn LlmBackend, seed: u64) -> (TrialResult, TrialArtifacts) {
    let start = Instant::now();
    let llm = Llm { backend, configs: &cfg.agents };
    let scene = &cfg.scene;
    let targets = Targets::from_scene(scene);
    let mut s = SessionState::with_task(scene.clone(), &cfg.task, Mode::OneShot, cfg.planner_kind);
    let mut arts = TrialArtifacts { planned: None, flown: None, transcript: serde_json::Value::Null };
    let model = cfg.planner.model(scene);
    let (outcome, planned, phi, flown) = match cfg.planner_kind {
        PlannerKind::Verna => match run_pipeline(&mut s, &llm, &cfg.planner, &cfg.caps) {
            PlanOutcome::Accepted(p) => {
                let flown = follow(&resample(&p.trajectory, cfg.follower.period()), &model, &cfg.follower);
                ("accepted".to_string(), Some(p.trajectory), Some(p.formula), Some(flown))
            }
            PlanOutcome::NeedsUser(_) => ("needs_user".to_string(), None, None, None),
            PlanOutcome::Failed(f) => (f.reason.as_str().to_string(), None, None, None),
        },
        PlannerKind::Conventional => match run_conventional(&mut s, &llm, &cfg.caps, cfg.follower.period(), &mut |_| {}) {
            PlanOutcome::Accepted(p) => {
                let path = path_trajectory(&densify(&p.waypoints, PATH_SPACING), cfg.follower.period());
                let flown = follow(&p.waypoints, &model, &cfg.follower);
                ("accepted".to_string(), Some(path), None, Some(flown))
            }
            PlanOutcome::NeedsUser(_) => ("needs_user".to_string(), None, None, None),
            PlanOutcome::Failed(f) => (f.reason.as_str().to_string(), None, None, None),
        },
    };
    arts.transcript = serde_json::to_value(&s.transcript).unwrap_or_default();
    let counters = [s.counters.loop1, s.counters.loop2, s.counters.loop3];
    let Some(planned) = planned else {
        let mut r = TrialResult::unsuccessful(seed, &outcome, None, start.elapsed().as_secs_f64());
        r.loop_counters = counters;
        return (r, arts);
    };
    let scored = evaluate_targets(&planned, scene, &targets, phi.as_ref());
    let flown_m = flown.as_ref().map(|f| evaluate_targets(f, scene, &targets, None));
    let result = match scored {
        Ok(m) => TrialResult {
            seed,
            accepted: true,
            goal_reached: m.goal_reached,
            collision_free: m.collision_free,
            robustness: m.final_robustness,
            wall_time_s: start.elapsed().as_secs_f64(),
            subtask_order_ok: m.subtask_order_ok,
            flown_goal_reached: flown_m.as_ref().and_then(|r| r.as_ref().ok()).map(|m| m.goal_reached),
            flown_collision_free: flown_m.as_ref().and_then(|r| r.as_ref().ok()).map(|m| m.collision_free),
            outcome,
            loop_counters: counters,
            error: None,
        },
        Err(e) => TrialResult::unsuccessful(seed, "evaluation_error", Some(e.to_string()), start.elapsed().as_secs_f64()),
    };
    arts.planned = Some(planned);
    arts.flown = flown;
    (result, arts)
}

fn write_artifacts(dir: &Path, i: usize, arts: &TrialArtifacts) -> std::io::Result<()> {
    if let Some(p) = &arts.planned {
        write_trajectory(&dir.join(format!("trial_{i:03}_planned.json")), p)?;
    }
    if let Some(f) = &arts.flown {
        write_trajectory(&dir.join(format!("trial_{i:03}_flown.json")), f)?;
    }
    std::fs::write(dir.join(format!("trial_{i:03}_transcript.json")), serde_json::to_string_pretty(&arts.transcript).unwrap_or_default())
}

/// Runs `cfg.n_trials` independent sessions. A trial that fails, panics or
/// cannot be evaluated counts as unsuccessful; the batch always completes.
pub fn experiment(cfg: &ExperimentConfig, backend: &dyn LlmBackend) -> std::io::Result<SuccessTable> {
    let start = Instant::now();
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialResult>>> = Mutex::new(vec![None; cfg.n_trials]);
    let io_error: Mutex<Option<std::io::Error>> = Mutex::new(None);
    let workers = cfg.workers.clamp(1, cfg.n_trials.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cfg.n_trials {
                    break;
                }
                let seed = cfg.seed(i);
                let t0 = Instant::now();
                let (result, arts) = match catch_unwind(AssertUnwindSafe(|| run_trial(cfg, backend, seed))) {
                    Ok(r) => r,
                    Err(panic) => {
                        let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
                        log::warn!("trial {i} panicked: {msg:?}");
                        let r = TrialResult::unsuccessful(seed, "panic", msg, t0.elapsed().as_secs_f64());
                        (r, TrialArtifacts { planned: None, flown: None, transcript: serde_json::Value::Null })
                    }
                };
                log::info!("trial {i} (seed {seed}): {} goal={} collision_free={}", result.outcome, result.goal_reached, result.collision_free);
                if let Some(dir) = &cfg.out_dir {
                    if let Err(e) = write_artifacts(dir, i, &arts) {
                        io_error.lock().unwrap().get_or_insert(e);
                    }
                }
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    if let Some(e) = io_error.into_inner().unwrap() {
        return Err(e);
    }
    let per_trial: Vec<TrialResult> = slots.into_inner().unwrap().into_iter().map(|r| r.expect("every trial ran")).collect();
    let table = SuccessTable::new(cfg.scene.scenario_id.clone(), cfg.planner_kind, per_trial, start.elapsed().as_secs_f64());
    if let Some(dir) = &cfg.out_dir {
        std::fs::write(dir.join("results.json"), table.to_json() + "\n")?;
        let meta = json!({ "task": cfg.task, "solver": cfg.planner.adapter_name(), "limits": cfg.planner.limits, "follower": cfg.follower });
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&meta).unwrap_or_default() + "\n")?;
    }
    Ok(table)
}

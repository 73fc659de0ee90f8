use verna_agents::backend::{BackendError, LlmBackend, LlmRequest};
use verna_agents::{fixtures, PlannerKind};
use verna_core::scene::bundled_scene;
use verna_sim::{experiment, ExperimentConfig};

fn config(scene: &str, kind: PlannerKind, n: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(bundled_scene(scene).unwrap(), kind, n);
    cfg.workers = 2;
    cfg
}

#[test]
fn verna_reach_avoid_writes_results_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("reach_avoid", PlannerKind::Verna, 2);
    cfg.seeds = vec![7, 8];
    cfg.out_dir = Some(dir.path().to_path_buf());
    let table = experiment(&cfg, &fixtures::scripted("reach_avoid_happy").unwrap()).unwrap();
    assert_eq!(table.summary.goal_reaching.count, 2);
    assert_eq!(table.summary.collision_free.count, 2);
    assert_eq!(table.summary.goal_reaching.total, 2);
    assert_eq!(table.per_trial.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![7, 8]);
    for t in &table.per_trial {
        assert!(t.accepted && t.robustness.unwrap() > 0.0);
        assert_eq!(t.loop_counters, [1, 0, 0]);
        assert!(t.flown_goal_reached.is_some());
    }
    let results: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(results["scenario"], "reach_avoid");
    assert_eq!(results["n_trials"], 2);
    for key in ["seed", "accepted", "goal_reached", "collision_free", "robustness", "wall_time_s"] {
        assert!(results["per_trial"][0].get(key).is_some(), "missing {key}");
    }
    let rows: Vec<[f64; 7]> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("trial_000_planned.json")).unwrap()).unwrap();
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(&rows[0][1..4], &[1.0, 1.0, 1.0]);
    assert!(dir.path().join("trial_001_flown.json").exists());
    assert!(dir.path().join("trial_001_transcript.json").exists());
}

#[test]
fn verna_treasure_hunt_keeps_the_order() {
    let table = experiment(&config("treasure_hunt", PlannerKind::Verna, 1), &fixtures::scripted("treasure_hunt_happy").unwrap()).unwrap();
    let t = &table.per_trial[0];
    assert!(t.goal_reached && t.collision_free);
    assert_eq!(t.subtask_order_ok, Some(true));
    assert_eq!(table.summary.subtask_order_ok.unwrap().count, 1);
}

#[test]
fn failing_fixture_scores_zero() {
    let table = experiment(&config("treasure_hunt", PlannerKind::Verna, 1), &fixtures::scripted("cap_exhaustion").unwrap()).unwrap();
    assert_eq!((table.summary.goal_reaching.count, table.summary.goal_reaching.total), (0, 1));
    assert_eq!(table.summary.collision_free.count, 0);
    assert_eq!(table.per_trial[0].outcome, "cap_exhausted");
    assert_eq!(table.summary.goal_reaching.to_string(), "0% (0/1)");
}

struct Exploding;

impl LlmBackend for Exploding {
    fn send(&self, req: &LlmRequest) -> Result<String, BackendError> {
        if req.call_index == 0 {
            panic!("backend blew up");
        }
        unreachable!()
    }
    fn name(&self) -> String {
        "exploding".into()
    }
}

#[test]
fn panicking_trials_do_not_abort_the_batch() {
    let table = experiment(&config("reach_avoid", PlannerKind::Verna, 3), &Exploding).unwrap();
    assert_eq!(table.n_trials, 3);
    assert!(table.per_trial.iter().all(|t| t.outcome == "panic" && !t.goal_reached));
}

#[test]
fn conventional_failure_classes_score_zero() {
    let run = |fixture: &str| {
        let table = experiment(&config("reach_avoid", PlannerKind::Conventional, 1), &fixtures::scripted(fixture).unwrap()).unwrap();
        let t = table.per_trial[0].clone();
        assert!(t.accepted, "{fixture}: {}", t.outcome);
        assert_eq!(t.robustness, None);
        t
    };
    let ok = run("conventional_success");
    assert!(ok.goal_reached && ok.collision_free);
    let miss = run("conventional_goal_miss");
    assert!(!miss.goal_reached && miss.collision_free);
    let hit = run("conventional_collision");
    assert!(!hit.collision_free);
}

#[test]
fn scripted_runs_are_deterministic() {
    let backend = fixtures::scripted("reach_avoid_happy").unwrap();
    let a = experiment(&config("reach_avoid", PlannerKind::Verna, 2), &backend).unwrap();
    let b = experiment(&config("reach_avoid", PlannerKind::Verna, 2), &backend).unwrap();
    for (x, y) in a.per_trial.iter().zip(&b.per_trial) {
        assert_eq!((x.goal_reached, x.collision_free, x.robustness, x.flown_goal_reached), (y.goal_reached, y.collision_free, y.robustness, y.flown_goal_reached));
    }
}

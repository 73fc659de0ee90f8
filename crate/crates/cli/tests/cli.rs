use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const TH_TASK: &str = "Go to the key in the first 30 seconds, then go to the chest. Avoid all walls and stay in the room at all times. The door will open when you reach the key.";

fn verna(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verna")).args(args).env_remove("VERNA_CONFIG").output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Exactly one stderr line, JSON with the given error kind.
fn assert_error_line(o: &Output, kind: &str) {
    let err = String::from_utf8_lossy(&o.stderr);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    let v: Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["error"], kind, "{err}");
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
}

#[test]
fn plan_reach_avoid_with_the_standard_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = verna(&["plan", "--scene", "reach_avoid", "--task", "Reach the goal while avoiding all obstacles.", "--one-shot", "--backend", "scripted:reach_avoid_happy", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(&out.join("trajectory.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 51);
    assert_eq!(rows[0].as_array().unwrap().len(), 7);
    assert_eq!(read_json(&out.join("outcome.json"))["outcome"], "accepted");
    assert!(std::fs::read_to_string(out.join("report.txt")).unwrap().contains("- goal: inside"));
    assert!(!read_json(&out.join("transcript.json")).as_array().unwrap().is_empty());

    let a = verna(&["analyze", "--scene", "reach_avoid", "--traj", out.join("trajectory.json").to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.trim(), std::fs::read_to_string(out.join("report.txt")).unwrap().trim());
}

#[test]
fn plan_treasure_hunt_visits_key_before_chest() {
    let dir = tempfile::tempdir().unwrap();
    let o = verna(&["plan", "--scene", "treasure_hunt", "--task", TH_TASK, "--backend", "scripted:treasure_hunt_happy", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    let first = |name: &str| -> u64 {
        let o = report["objects"].as_array().unwrap().iter().find(|o| o["name"] == name).unwrap();
        o["containment"]["intervals"][0][0].as_u64().unwrap()
    };
    assert!(first("key") < first("chest"));
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let failed = verna(&["plan", "--scene", "treasure_hunt", "--backend", "scripted:cap_exhaustion", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(2));
    assert_error_line(&failed, "cap_exhausted");
    assert_eq!(read_json(&dir.path().join("outcome.json"))["detail"]["reason"], "cap_exhausted");

    let asked = verna(&["plan", "--scene", "reach_avoid", "--backend", "scripted:one_shot_question", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(asked.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&asked.stdout).contains("question:"));

    let resent = verna(&["plan", "--scene", "reach_avoid", "--one-shot", "--backend", "scripted:one_shot_question", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(resent.status.code(), Some(0));
}

#[test]
fn emit_model_does_not_solve() {
    let contradictory = r#"STL_formulas.inside_cuboid("goal").always(0, 2) & STL_formulas.outside_cuboid("goal").always(0, 2)"#;
    for fmt in ["lp", "mps"] {
        let o = verna(&["emit-model", "--scene", "reach_avoid", "--stl", contradictory, "--fmt", fmt]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.contains(if fmt == "lp" { "Subject To" } else { "ROWS" }));
    }
    let o = verna(&["emit-model", "--scene", "reach_avoid", "--stl", "STL_formulas.inside_cuboid(\"gaol\")"]);
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "parse");
}

#[test]
fn errors_are_single_json_lines() {
    let o = verna(&["plan", "--scene", "atlantis", "--backend", "scripted:reach_avoid_happy"]);
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "scene");

    let o = verna(&["plan", "--scene", "reach_avoid", "--backend", "scripted:no_such_fixture"]);
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "backend");

    let o = Command::new(env!("CARGO_BIN_EXE_verna")).args(["plan", "--scene", "reach_avoid", "--backend", "live"]).env_remove("VERNA_LLM_KEY").env_remove("VERNA_CONFIG").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "backend");

    let o = verna(&["plan", "--scene"]);
    assert_eq!(o.status.code(), Some(64));
    assert_error_line(&o, "usage");

    let o = Command::new(env!("CARGO_BIN_EXE_verna")).args(["analyze", "--scene", "reach_avoid", "--traj", "/nonexistent.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "io");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solver]\nwhat = 1\n").unwrap();
    let o = verna(&["--config", cfg.to_str().unwrap(), "plan", "--scene", "reach_avoid", "--backend", "scripted:reach_avoid_happy"]);
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "config");

    let o = Command::new(env!("CARGO_BIN_EXE_verna"))
        .args(["plan", "--scene", "reach_avoid", "--backend", "scripted:reach_avoid_happy"])
        .env("VERNA_SOLVER_TIME_S", "later")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_error_line(&o, "config");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verna.toml");
    // no solve fits in the file's time limit; the flag replaces it while the
    // file's step size still applies
    std::fs::write(&cfg, "[solver]\ntime_s = 0.001\n[planner]\ndt = 0.25\n").unwrap();
    let out = dir.path().join("run");
    let o = verna(&["--config", cfg.to_str().unwrap(), "--time-limit", "60", "plan", "--scene", "reach_avoid", "--one-shot", "--backend", "scripted:reach_avoid_happy", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(&out.join("trajectory.json"));
    assert_eq!(rows[1][0].as_f64(), Some(0.25));
}

#[test]
fn experiment_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = verna(&["experiment", "--scene", "reach_avoid", "--planner", "conventional", "--trials", "2", "--backend", "scripted:conventional_collision", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("collision-free: 0% (0/2)"), "{stdout}");
    let r = read_json(&dir.path().join("results.json"));
    assert_eq!(r["planner_kind"], "conventional");
    assert_eq!(r["per_trial"].as_array().unwrap().len(), 2);
    assert_eq!(r["summary"]["goal_reaching"]["count"], 2);
}

#[test]
fn chat_reject_then_accept() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_verna"))
        .args(["chat", "--scene", "reach_avoid", "--backend", "scripted:demo_reject", "--out", dir.path().to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"Reach the goal while avoiding all obstacles.\nhello\nreject Please arrive at the goal sooner.\naccept\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.matches("[plan ready]").count(), 2, "{text}");
    assert!(text.contains("A plan is waiting"));
    assert!(text.contains("[accepted]"));
    assert!(std::fs::read_to_string(dir.path().join("spec.stl")).unwrap().contains("eventually(0, 20)"));
}

#[test]
fn chat_without_a_decision_needs_the_user() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_verna"))
        .args(["chat", "--scene", "reach_avoid", "--backend", "scripted:reach_avoid_happy"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"Reach the goal while avoiding all obstacles.\n").unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(3));
}

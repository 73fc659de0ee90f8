use verna_agents::fixtures;
use verna_agents::pipeline;
use verna_agents::session::TranscriptEvent;
use verna_agents::*;
use verna_core::scene::bundled_scene;
use verna_core::{robustness, satisfied};

const REACH_AVOID: &str = "Reach the goal while avoiding all obstacles.";
const TREASURE_HUNT: &str = "Go to the key in the first 30 seconds, then go to the chest. Avoid all walls and stay in the room at all times. The door will open when you reach the key.";

fn run_with(fixture: &str, scene: &str, task: &str, mode: Mode, caps: Caps) -> (SessionState, PlanOutcome) {
    let backend = fixtures::scripted(fixture).unwrap();
    let configs = AgentConfigs::default();
    let llm = Llm { backend: &backend, configs: &configs };
    let mut s = SessionState::with_task(bundled_scene(scene).unwrap(), task, mode, PlannerKind::Verna);
    let out = run_pipeline(&mut s, &llm, &Planner::in_process(), &caps);
    (s, out)
}

fn run(fixture: &str, scene: &str, task: &str) -> (SessionState, PlanOutcome) {
    run_with(fixture, scene, task, Mode::OneShot, Caps::default())
}

fn counters(s: &SessionState) -> (usize, usize, usize) {
    (s.counters.loop1, s.counters.loop2, s.counters.loop3)
}

/// Every backend call shows up exactly once, under one loop.
fn assert_calls_attributed(s: &SessionState) {
    let per_loop = s.calls_per_loop();
    let total: usize = Agent::ALL.iter().map(|a| s.calls.get(*a)).sum();
    assert_eq!(per_loop.iter().sum::<usize>(), total);
    for e in &s.transcript {
        if let TranscriptEvent::Call { agent, .. } = &e.event {
            let expected = match agent {
                Agent::Pa => 1,
                Agent::SynCheQ => 2,
                Agent::SemCheQ => 3,
            };
            assert_eq!(e.loop_no, expected, "{agent} call logged under loop {}", e.loop_no);
        }
    }
}

fn accepted(out: PlanOutcome) -> pipeline::VernaPlan {
    match out {
        PlanOutcome::Accepted(p) => p,
        other => panic!("expected acceptance, got {other:?}"),
    }
}

#[test]
fn reach_avoid_happy_path() {
    let (s, out) = run("reach_avoid_happy", "reach_avoid", REACH_AVOID);
    let plan = accepted(out);
    assert_eq!(counters(&s), (1, 0, 0));
    assert_eq!(s.status, Status::Accepted);
    assert!(satisfied(&plan.formula, &plan.trajectory, 0).unwrap());
    assert!(robustness(&plan.formula, &plan.trajectory, 0).unwrap() > 0.0);
    assert_eq!(plan.report.get("goal").map(|c| matches!(c, Containment::InsideDuring(_))), Some(true));
    for i in 1..=7 {
        assert_eq!(plan.report.get(&format!("obstacle{i}")), Some(&Containment::NeverInside));
    }
    assert_calls_attributed(&s);
}

#[test]
fn treasure_hunt_happy_path_visits_key_door_chest_in_order() {
    let (s, out) = run("treasure_hunt_happy", "treasure_hunt", TREASURE_HUNT);
    let plan = accepted(out);
    assert_eq!(counters(&s), (1, 0, 0));
    let r = &plan.report;
    let (key, door, chest) = (r.first_entry("key").unwrap(), r.first_entry("door").unwrap(), r.first_entry("chest").unwrap());
    assert!(key < door && door < chest, "key {key} door {door} chest {chest}");
    assert!((key as f64) * plan.trajectory.dt() <= 30.0);
    assert_eq!(r.get("room"), Some(&Containment::AlwaysInside));
    assert_calls_attributed(&s);
}

#[test]
fn loop2_repairs_an_infeasible_specification() {
    let (s, out) = run("loop2_infeasible", "reach_avoid", REACH_AVOID);
    let plan = accepted(out);
    assert_eq!(counters(&s), (1, 1, 0));
    assert!(plan.stl_text.contains("eventually(0, 25)"));
    let solves: Vec<_> = s.transcript.iter().filter_map(|e| match &e.event {
        TranscriptEvent::Solve { status, .. } => Some(*status),
        _ => None,
    }).collect();
    assert_eq!(solves.len(), 2);
    assert!(!solves[0].has_solution() && solves[1].has_solution(), "{solves:?}");
    assert_calls_attributed(&s);
}

#[test]
fn loop2_repairs_a_syntax_error() {
    let (s, out) = run("loop2_syntax", "reach_avoid", REACH_AVOID);
    accepted(out);
    assert_eq!(counters(&s), (1, 1, 0));
    assert!(s.transcript.iter().any(|e| matches!(&e.event, TranscriptEvent::ParseError { error, .. } if error.contains("eventualy"))));
}

#[test]
fn loop3_advice_leads_to_the_ordered_specification() {
    let (s, out) = run("loop3_advice", "treasure_hunt", TREASURE_HUNT);
    let plan = accepted(out);
    assert_eq!(counters(&s), (2, 0, 1));
    assert!(plan.stl_text.contains("until"));
    let advice = s.pa_history.iter().filter(|m| m.role == Role::User).nth(1).unwrap();
    assert!(advice.content.contains("Visit the key before the chest"));
    assert_calls_attributed(&s);
}

#[test]
fn semantic_cap_exhaustion_fails() {
    let (s, out) = run("cap_exhaustion", "treasure_hunt", TREASURE_HUNT);
    match out {
        PlanOutcome::Failed(f) => {
            assert_eq!(f.reason, FailReason::CapExhausted);
            assert_eq!(f.transcript, s.transcript);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(counters(&s), (3, 0, 2));
    assert_eq!(s.status, Status::Failed);
    assert_eq!(s.calls_per_loop(), [3, 0, 3]);

    let (s, out) = run_with("cap_exhaustion", "treasure_hunt", TREASURE_HUNT, Mode::OneShot, Caps { loop1: 1, loop2: 1, loop3: 1 });
    assert!(matches!(out, PlanOutcome::Failed(Failure { reason: FailReason::CapExhausted, .. })));
    assert_eq!(counters(&s), (1, 0, 1));
}

#[test]
fn syntax_cap_exhaustion_fails() {
    let (s, out) = run("syntax_cap_exhaustion", "reach_avoid", REACH_AVOID);
    assert!(matches!(out, PlanOutcome::Failed(Failure { reason: FailReason::CapExhausted, .. })), "{out:?}");
    assert_eq!(counters(&s), (1, 3, 0));
}

#[test]
fn infeasible_without_loop2_budget_is_final() {
    let caps = Caps { loop2: 0, ..Caps::default() };
    let (s, out) = run_with("loop2_infeasible", "reach_avoid", REACH_AVOID, Mode::OneShot, caps);
    assert!(matches!(out, PlanOutcome::Failed(Failure { reason: FailReason::InfeasibleFinal, .. })), "{out:?}");
    assert_eq!(s.calls.get(Agent::SynCheQ), 0);
}

#[test]
fn backend_errors_fail_the_run() {
    let backend = ScriptedBackend::default();
    let configs = AgentConfigs::default();
    let llm = Llm { backend: &backend, configs: &configs };
    let mut s = SessionState::with_task(bundled_scene("reach_avoid").unwrap(), REACH_AVOID, Mode::OneShot, PlannerKind::Verna);
    let out = run_pipeline(&mut s, &llm, &Planner::in_process(), &Caps::default());
    assert!(matches!(out, PlanOutcome::Failed(Failure { reason: FailReason::BackendError, .. })));
    assert!(s.pa_history.is_empty());
}

#[test]
fn questions_in_both_modes() {
    let (s, out) = run("one_shot_question", "reach_avoid", REACH_AVOID);
    accepted(out);
    assert_eq!(counters(&s), (2, 0, 0));
    let users: Vec<_> = s.pa_history.iter().filter(|m| m.role == Role::User).map(|m| m.content.as_str()).collect();
    assert_eq!(users, [REACH_AVOID, REACH_AVOID]);

    let (s, out) = run_with("one_shot_question", "reach_avoid", REACH_AVOID, Mode::Conversation, Caps::default());
    match out {
        PlanOutcome::NeedsUser(q) => assert!(q.starts_with("Which object")),
        other => panic!("{other:?}"),
    }
    assert_eq!(s.status, Status::AwaitingUser);
}

#[test]
fn conversation_reject_reaches_the_assistant() {
    let backend = fixtures::scripted("demo_reject").unwrap();
    let configs = AgentConfigs::default();
    let llm = Llm { backend: &backend, configs: &configs };
    let planner = Planner::in_process();
    let mut s = SessionState::with_task(bundled_scene("reach_avoid").unwrap(), REACH_AVOID, Mode::Conversation, PlannerKind::Verna);
    let mut events = Vec::new();
    accepted(run_pipeline_observed(&mut s, &llm, &planner, &Caps::default(), &mut |e| events.push(e)));
    assert_eq!(s.status, Status::AwaitingDecision);
    assert!(matches!(events.last(), Some(PipelineEvent::PlanReady { .. })));
    s.decide(false, Some("Please arrive earlier.")).unwrap();
    let plan = accepted(run_pipeline(&mut s, &llm, &planner, &Caps::default()));
    assert!(plan.stl_text.contains("eventually(0, 20)"));
    assert_eq!(s.pa_history.iter().filter(|m| m.role == Role::User).next_back().unwrap().content, "Please arrive earlier.");
    s.decide(true, None).unwrap();
    assert_eq!(s.status, Status::Accepted);
    assert!(s.decide(true, None).is_err());
}

#[test]
fn scripted_runs_are_bit_deterministic() {
    let (a, oa) = run("loop3_advice", "treasure_hunt", TREASURE_HUNT);
    let (b, ob) = run("loop3_advice", "treasure_hunt", TREASURE_HUNT);
    assert_eq!(a.transcript, b.transcript);
    let (pa, pb) = (accepted(oa), accepted(ob));
    let bits = |p: &pipeline::VernaPlan| p.trajectory.states().flat_map(|s| s.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    assert_eq!(bits(&pa), bits(&pb));
}

#[test]
fn conventional_mode_runs_end_to_end() {
    let backend = fixtures::scripted("conventional_success").unwrap();
    let configs = AgentConfigs::default();
    let llm = Llm { backend: &backend, configs: &configs };
    let mut s = SessionState::with_task(bundled_scene("reach_avoid").unwrap(), REACH_AVOID, Mode::OneShot, PlannerKind::Conventional);
    match run_conventional(&mut s, &llm, &Caps::default(), 0.1, &mut |_| {}) {
        PlanOutcome::Accepted(p) => {
            assert_eq!(p.waypoints.len(), 8);
            assert_eq!(p.waypoints[0], [1.0, 1.0, 1.0]);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(counters(&s), (1, 0, 0));
    assert!(s.pa_history[0].content.contains("<WAYPOINTS>"));
}

//! The three correction loops: specification (1), syntax and feasibility (2)
//! and semantics (3).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use verna_core::dsl::extract_stl_block;
use verna_core::scene::Scene;
use verna_core::{satisfied, Formula, Trajectory};
use verna_plan::{encode, solve, DroneModel, InProcessSolver, InitialState, Limits, PlanError, PlanProblem, SolveResult, SolverAdapter};

use crate::agents::{conventional_pa_step, pa_step, semcheq_judge, syncheq_fix, ConventionalReply, Rejection, SynAttempt, SynCheck, SynCheqError};
use crate::message::{Agent, ChatMessage};
use crate::paz::{paz_describe, PathReport};
use crate::reply::{PaReply, Verdict};
use crate::session::{Caps, Llm, Mode, SessionState, Status, TranscriptEntry, TranscriptEvent};

pub type AdapterFactory = Arc<dyn Fn() -> Box<dyn SolverAdapter> + Send + Sync>;

/// Turns formulas into trajectories. Every solve gets a fresh adapter.
#[derive(Clone)]
pub struct Planner {
    pub dt: f64,
    pub min_horizon: usize,
    pub limits: Limits,
    factory: AdapterFactory,
}

impl std::fmt::Debug for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Planner").field("dt", &self.dt).field("min_horizon", &self.min_horizon).field("limits", &self.limits).finish()
    }
}

impl Planner {
    /// Node budget of the in-process search; the primal heuristic finds the
    /// trajectory, the nodes only tighten the bound.
    pub const DEFAULT_NODES: usize = 20;

    pub fn new(factory: AdapterFactory) -> Self {
        Planner {
            dt: DroneModel::DEFAULT_DT,
            min_horizon: PlanProblem::DEFAULT_HORIZON,
            limits: Limits { time_s: 60.0, gap: 1e-6, node_limit: Some(Self::DEFAULT_NODES) },
            factory,
        }
    }

    pub fn in_process() -> Self {
        Self::new(Arc::new(|| Box::new(InProcessSolver::default())))
    }

    pub fn adapter_name(&self) -> String {
        (self.factory)().name()
    }

    pub fn model(&self, scene: &Scene) -> DroneModel {
        DroneModel { dt: self.dt, ..DroneModel::for_workspace(&scene.workspace) }
    }

    pub fn problem(&self, scene: &Scene, phi: Formula) -> PlanProblem {
        PlanProblem::fitted(self.model(scene), phi, self.min_horizon, InitialState::at_rest(scene.start))
    }

    pub fn plan(&self, scene: &Scene, phi: &Formula) -> Result<SolveResult, PlanError> {
        let prob = self.problem(scene, phi.clone());
        let m = encode(&prob, None)?;
        let mut adapter = (self.factory)();
        Ok(solve(&m, adapter.as_mut(), &self.limits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    CapExhausted,
    BackendError,
    InfeasibleFinal,
}

impl FailReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailReason::CapExhausted => "cap_exhausted",
            FailReason::BackendError => "backend_error",
            FailReason::InfeasibleFinal => "infeasible_final",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub reason: FailReason,
    pub message: String,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone)]
pub struct VernaPlan {
    pub trajectory: Trajectory,
    pub formula: Formula,
    pub stl_text: String,
    pub result: SolveResult,
    pub report: PathReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConventionalPlan {
    pub waypoints: Vec<[f64; 3]>,
    pub report: PathReport,
}

#[derive(Debug, Clone)]
pub enum PlanOutcome<P = VernaPlan> {
    Accepted(P),
    /// Conversation mode: the assistant asks the user something.
    NeedsUser(String),
    Failed(Failure),
}

impl<P> PlanOutcome<P> {
    pub fn kind(&self) -> &'static str {
        match self {
            PlanOutcome::Accepted(_) => "accepted",
            PlanOutcome::NeedsUser(_) => "needs_user",
            PlanOutcome::Failed(_) => "failed",
        }
    }
}

/// Progress notifications, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum PipelineEvent {
    AssistantMessage { agent: Agent, text: String, question: bool },
    StlCandidate { stl_text: String, source: Agent },
    PlanReady { stl_text: Option<String>, objective: Option<f64>, robustness: Option<f64>, steps: usize, dt: f64 },
    PlanFailed { reason: FailReason, message: String },
    PazReport { report: PathReport },
    SemcheqVerdict { verdict: Verdict },
}

fn fail<P>(s: &mut SessionState, reason: FailReason, message: String, obs: &mut dyn FnMut(PipelineEvent)) -> PlanOutcome<P> {
    s.status = Status::Failed;
    log::info!("pipeline failed ({}): {message}", reason.as_str());
    s.log(0, TranscriptEvent::Note { text: format!("failed ({}): {message}", reason.as_str()) });
    obs(PipelineEvent::PlanFailed { reason, message: message.clone() });
    PlanOutcome::Failed(Failure { reason, message, transcript: s.transcript.clone() })
}

/// Message for the assistant before the run starts, if any.
fn begin(s: &mut SessionState) -> Option<String> {
    s.counters = Default::default();
    s.candidate_text = None;
    s.candidate_stl = None;
    s.candidate_result = None;
    let msg = s.pending.take().or_else(|| (!s.task_text.is_empty() && s.pa_history.is_empty()).then(|| s.task_text.clone()))?;
    s.status = Status::Planning;
    Some(msg)
}

fn no_message<P>(s: &mut SessionState) -> PlanOutcome<P> {
    s.status = Status::AwaitingUser;
    PlanOutcome::NeedsUser("Please describe the mission.".into())
}

/// Next assistant message after a question, or the outcome to return.
fn after_question<P>(s: &mut SessionState, resent: &mut bool, question: String, obs: &mut dyn FnMut(PipelineEvent)) -> Result<String, PlanOutcome<P>> {
    match s.mode {
        Mode::Conversation => {
            s.status = Status::AwaitingUser;
            Err(PlanOutcome::NeedsUser(question))
        }
        Mode::OneShot if !*resent => {
            *resent = true;
            s.log(1, TranscriptEvent::Note { text: "one-shot mode: answering the question with the original task".into() });
            Ok(s.task_text.clone())
        }
        Mode::OneShot => Err(fail(s, FailReason::CapExhausted, "the planning assistant kept asking questions in one-shot mode".into(), obs)),
    }
}

/// Loop 3 on an analyzed path: `Ok(None)` when aligned, `Ok(Some(msg))` with
/// the advice to pass to the assistant.
fn semantic_loop<P>(s: &mut SessionState, llm: &Llm<'_>, caps: &Caps, report: &PathReport, obs: &mut dyn FnMut(PipelineEvent)) -> Result<Option<String>, PlanOutcome<P>> {
    loop {
        let j = match semcheq_judge(&s.task_text, &s.pa_history, report, &s.scene, llm, &mut s.calls) {
            Ok(j) => j,
            Err(e) => return Err(fail(s, FailReason::BackendError, format!("semantics checker: {e}"), obs)),
        };
        s.semcheq_history.push(ChatMessage::user(j.prompt.clone()));
        s.semcheq_history.push(ChatMessage::assistant(j.reply.clone()));
        s.log(3, TranscriptEvent::Call { agent: Agent::SemCheQ, call_index: j.call_index, input: j.prompt, reply: j.reply });
        obs(PipelineEvent::SemcheqVerdict { verdict: j.verdict.clone() });
        let advice = match j.verdict {
            Verdict::Aligned => return Ok(None),
            Verdict::Advice(a) => Some(a),
            Verdict::Malformed(_) => None,
        };
        if s.counters.loop3 >= caps.loop3 {
            let why = advice.map_or_else(|| "the last verdict was malformed".to_string(), |a| format!("last advice: {a}"));
            return Err(fail(s, FailReason::CapExhausted, format!("path not aligned with the task after {} semantic rounds ({why})", caps.loop3), obs));
        }
        s.counters.loop3 += 1;
        match advice {
            Some(a) => {
                return Ok(Some(format!(
                    "The semantics checker reviewed the resulting path and advises: {a}\nPlease revise the specification accordingly."
                )))
            }
            None => s.log(3, TranscriptEvent::Note { text: "malformed verdict, asking the semantics checker again".into() }),
        }
    }
}

struct Loop2<'a> {
    planner: &'a Planner,
    scene: &'a Scene,
    transcript: &'a mut Vec<TranscriptEntry>,
    obs: &'a mut dyn FnMut(PipelineEvent),
}

impl SynCheck for Loop2<'_> {
    type Value = SolveResult;

    fn validate(&mut self, stl_text: &str, phi: &Formula) -> Result<SolveResult, String> {
        let r = self.planner.plan(self.scene, phi).map_err(|e| format!("the optimizer rejected the specification: {e}"))?;
        self.transcript.push(TranscriptEntry {
            loop_no: 2,
            event: TranscriptEvent::Solve {
                stl_text: stl_text.to_string(),
                status: r.status,
                message: r.message.clone(),
                objective: r.objective,
                robustness: r.robustness,
            },
        });
        let ok = r.status.has_solution() && r.trajectory.as_ref().is_some_and(|t| satisfied(phi, t, 0).unwrap_or(false));
        if ok {
            Ok(r)
        } else {
            Err(format!("optimizer: {:?}: {}", r.status, r.message))
        }
    }

    fn on_reply(&mut self, a: &SynAttempt) {
        self.transcript.push(TranscriptEntry {
            loop_no: 2,
            event: TranscriptEvent::Call { agent: Agent::SynCheQ, call_index: a.call_index, input: format!("{}\n\n{}", a.stl_in, a.error), reply: a.reply.clone() },
        });
        (self.obs)(PipelineEvent::AssistantMessage { agent: Agent::SynCheQ, text: a.reply.clone(), question: false });
        if let Ok(t) = extract_stl_block(&a.reply) {
            (self.obs)(PipelineEvent::StlCandidate { stl_text: t, source: Agent::SynCheQ });
        }
    }

    fn on_rejected(&mut self, stl_text: &str, kind: Rejection, error: &str) {
        if kind == Rejection::Syntax {
            self.transcript.push(TranscriptEntry { loop_no: 2, event: TranscriptEvent::ParseError { stl_text: stl_text.to_string(), error: error.to_string() } });
        }
    }
}

pub fn run_pipeline(s: &mut SessionState, llm: &Llm<'_>, planner: &Planner, caps: &Caps) -> PlanOutcome {
    run_pipeline_observed(s, llm, planner, caps, &mut |_| {})
}

/// Runs the loops on the session's pending message until a plan is accepted
/// by the semantics checker, the user is needed, or a cap is hit.
pub fn run_pipeline_observed(s: &mut SessionState, llm: &Llm<'_>, planner: &Planner, caps: &Caps, obs: &mut dyn FnMut(PipelineEvent)) -> PlanOutcome {
    let Some(mut msg) = begin(s) else { return no_message(s) };
    let mut resent = false;
    loop {
        if s.counters.loop1 >= caps.loop1 {
            return fail(s, FailReason::CapExhausted, format!("no accepted specification after {} planning-assistant calls", caps.loop1), obs);
        }
        let step = match pa_step(s, &msg, llm) {
            Ok(step) => step,
            Err(e) => return fail(s, FailReason::BackendError, format!("planning assistant: {e}"), obs),
        };
        s.counters.loop1 += 1;
        s.log(1, TranscriptEvent::Call { agent: Agent::Pa, call_index: step.call_index, input: msg.clone(), reply: step.raw.clone() });
        let question = matches!(step.reply, PaReply::Question { .. });
        obs(PipelineEvent::AssistantMessage { agent: Agent::Pa, text: step.raw.clone(), question });
        let stl_text = match step.reply {
            PaReply::Question { text } => match after_question(s, &mut resent, text, obs) {
                Ok(next) => {
                    msg = next;
                    continue;
                }
                Err(outcome) => return outcome,
            },
            PaReply::Candidate { stl_text, .. } => stl_text,
        };
        obs(PipelineEvent::StlCandidate { stl_text: stl_text.clone(), source: Agent::Pa });

        let cap2 = caps.loop2.saturating_sub(s.counters.loop2);
        let fixed = {
            let mut check = Loop2 { planner, scene: &s.scene, transcript: &mut s.transcript, obs: &mut *obs };
            syncheq_fix(&stl_text, None, &s.scene, planner.dt, llm, &mut s.calls, cap2, &mut check)
        };
        let fixed = match fixed {
            Ok(f) => {
                s.counters.loop2 += f.attempts.len();
                f
            }
            Err(e) => {
                s.counters.loop2 += e.attempts().len();
                let reason = match &e {
                    SynCheqError::Backend { .. } => FailReason::BackendError,
                    SynCheqError::FailedAfterCap { last_kind: Rejection::Validation, .. } => FailReason::InfeasibleFinal,
                    SynCheqError::FailedAfterCap { last_kind: Rejection::Syntax, .. } => FailReason::CapExhausted,
                };
                return fail(s, reason, e.to_string(), obs);
            }
        };

        let result = fixed.value;
        let trajectory = result.trajectory.clone().expect("validated solve has a trajectory");
        s.candidate_text = Some(fixed.stl_text.clone());
        s.candidate_stl = Some(fixed.formula.clone());
        s.candidate_result = Some(result.clone());
        let report = paz_describe(&trajectory, &s.scene);
        s.log(3, TranscriptEvent::Report { text: report.rendered_text.clone() });
        obs(PipelineEvent::PazReport { report: report.clone() });
        match semantic_loop(s, llm, caps, &report, obs) {
            Ok(None) => {
                s.status = if s.mode == Mode::Conversation { Status::AwaitingDecision } else { Status::Accepted };
                obs(PipelineEvent::PlanReady {
                    stl_text: Some(fixed.stl_text.clone()),
                    objective: Some(result.objective),
                    robustness: Some(result.robustness),
                    steps: trajectory.len(),
                    dt: trajectory.dt(),
                });
                return PlanOutcome::Accepted(VernaPlan { trajectory, formula: fixed.formula, stl_text: fixed.stl_text, result, report });
            }
            Ok(Some(advice)) => msg = advice,
            Err(outcome) => return outcome,
        }
    }
}

/// Baseline: the assistant writes waypoints; no optimizer, same semantic
/// check. `waypoint_dt` is the time between consecutive waypoints.
pub fn run_conventional(s: &mut SessionState, llm: &Llm<'_>, caps: &Caps, waypoint_dt: f64, obs: &mut dyn FnMut(PipelineEvent)) -> PlanOutcome<ConventionalPlan> {
    let Some(mut msg) = begin(s) else { return no_message(s) };
    let mut resent = false;
    loop {
        if s.counters.loop1 >= caps.loop1 {
            return fail(s, FailReason::CapExhausted, format!("no accepted path after {} planning-assistant calls", caps.loop1), obs);
        }
        let step = match conventional_pa_step(s, &msg, llm) {
            Ok(step) => step,
            Err(e) => return fail(s, FailReason::BackendError, format!("planning assistant: {e}"), obs),
        };
        s.counters.loop1 += 1;
        s.log(1, TranscriptEvent::Call { agent: Agent::Pa, call_index: step.call_index, input: msg.clone(), reply: step.raw.clone() });
        let question = matches!(step.reply, ConventionalReply::Question(_));
        obs(PipelineEvent::AssistantMessage { agent: Agent::Pa, text: step.raw.clone(), question });
        let waypoints = match step.reply {
            ConventionalReply::Question(text) => match after_question(s, &mut resent, text, obs) {
                Ok(next) => {
                    msg = next;
                    continue;
                }
                Err(outcome) => return outcome,
            },
            ConventionalReply::Invalid(e) => {
                s.log(1, TranscriptEvent::Note { text: format!("unreadable waypoints: {e}") });
                msg = format!("Your waypoint block could not be read: {e}. Please answer again with a valid block.");
                continue;
            }
            ConventionalReply::Waypoints(w) => w,
        };
        let path = Trajectory::new(waypoints.iter().map(|p| p.to_vec()).collect(), waypoint_dt).expect("finite waypoints");
        let report = paz_describe(&path, &s.scene);
        s.log(3, TranscriptEvent::Report { text: report.rendered_text.clone() });
        obs(PipelineEvent::PazReport { report: report.clone() });
        match semantic_loop(s, llm, caps, &report, obs) {
            Ok(None) => {
                s.status = if s.mode == Mode::Conversation { Status::AwaitingDecision } else { Status::Accepted };
                obs(PipelineEvent::PlanReady { stl_text: None, objective: None, robustness: None, steps: waypoints.len(), dt: waypoint_dt });
                return PlanOutcome::Accepted(ConventionalPlan { waypoints, report });
            }
            Ok(Some(advice)) => msg = advice,
            Err(outcome) => return outcome,
        }
    }
}

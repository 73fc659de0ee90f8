//! Single agent steps: planning assistant, syntax checker, semantics checker.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use verna_core::dsl::{extract_stl_block, parse, DslSource};
use verna_core::scene::Scene;
use verna_core::Formula;

use crate::backend::BackendError;
use crate::message::{Agent, ChatMessage, Role};
use crate::paz::PathReport;
use crate::prompt::{build_system_prompt, PromptRole};
use crate::reply::{parse_pa_reply, parse_verdict, parse_waypoints, PaReply, Verdict, WaypointError};
use crate::session::{CallCounts, Llm, PlannerKind, SessionState};

/// A planning-assistant answer.
#[derive(Debug, Clone, PartialEq)]
pub struct PaStep {
    pub call_index: usize,
    pub raw: String,
    pub reply: PaReply,
}

fn pa_exchange(s: &mut SessionState, user_msg: &str, llm: &Llm<'_>, role: PromptRole) -> Result<(usize, String), BackendError> {
    let mut messages = s.pa_history.clone();
    if messages.is_empty() {
        messages.push(ChatMessage::system(build_system_prompt(&s.scene, role)));
    }
    messages.push(ChatMessage::user(user_msg));
    let (call_index, raw) = s.calls.ask(llm, Agent::Pa, &messages)?;
    messages.push(ChatMessage::assistant(raw.clone()));
    s.pa_history = messages;
    Ok((call_index, raw))
}

/// Sends `user_msg` to the planning assistant. On a backend error the session
/// is left untouched.
pub fn pa_step(s: &mut SessionState, user_msg: &str, llm: &Llm<'_>) -> Result<PaStep, BackendError> {
    let (call_index, raw) = pa_exchange(s, user_msg, llm, PromptRole::Pa)?;
    let reply = parse_pa_reply(&raw);
    Ok(PaStep { call_index, raw, reply })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConventionalReply {
    Question(String),
    Waypoints(Vec<[f64; 3]>),
    Invalid(WaypointError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConventionalStep {
    pub call_index: usize,
    pub raw: String,
    pub reply: ConventionalReply,
}

/// Baseline assistant answering with a `<WAYPOINTS>` block.
pub fn conventional_pa_step(s: &mut SessionState, user_msg: &str, llm: &Llm<'_>) -> Result<ConventionalStep, BackendError> {
    debug_assert_eq!(s.kind, PlannerKind::Conventional);
    let (call_index, raw) = pa_exchange(s, user_msg, llm, PromptRole::Conventional)?;
    let reply = match parse_waypoints(&raw) {
        Ok(w) => ConventionalReply::Waypoints(w),
        Err(WaypointError::Missing) => ConventionalReply::Question(raw.trim().to_string()),
        Err(e) => ConventionalReply::Invalid(e),
    };
    Ok(ConventionalStep { call_index, raw, reply })
}

/// One syntax-checker exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynAttempt {
    pub call_index: usize,
    pub stl_in: String,
    pub error: String,
    pub reply: String,
    /// Why the revised text was still rejected; `None` when it was accepted.
    pub rejected: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SynFixed<T> {
    pub formula: Formula,
    pub stl_text: String,
    /// What the validator returned for the accepted formula.
    pub value: T,
    pub attempts: Vec<SynAttempt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// The text does not parse.
    Syntax,
    /// It parses but the validator (the optimizer) rejects it.
    Validation,
}

#[derive(Debug, Clone, Error)]
pub enum SynCheqError {
    #[error("no valid specification after {} syntax-checker attempts: {last_error}", attempts.len())]
    FailedAfterCap { attempts: Vec<SynAttempt>, last_error: String, last_kind: Rejection },
    #[error("syntax checker: {error}")]
    Backend { error: BackendError, attempts: Vec<SynAttempt> },
}

impl SynCheqError {
    pub fn attempts(&self) -> &[SynAttempt] {
        match self {
            SynCheqError::FailedAfterCap { attempts, .. } | SynCheqError::Backend { attempts, .. } => attempts,
        }
    }
}

/// What [`syncheq_fix`] accepts, plus hooks for observing the exchange.
pub trait SynCheck {
    type Value;

    /// Runs on every text that parses; an error is forwarded to the checker.
    fn validate(&mut self, stl_text: &str, phi: &Formula) -> Result<Self::Value, String>;

    fn on_reply(&mut self, _attempt: &SynAttempt) {}

    fn on_rejected(&mut self, _stl_text: &str, _kind: Rejection, _error: &str) {}
}

impl<T, F: FnMut(&str, &Formula) -> Result<T, String>> SynCheck for F {
    type Value = T;

    fn validate(&mut self, stl_text: &str, phi: &Formula) -> Result<T, String> {
        self(stl_text, phi)
    }
}

fn check<C: SynCheck + ?Sized>(text: &str, scene: &Scene, dt: f64, checker: &mut C) -> Result<(Formula, C::Value), (Rejection, String)> {
    let res = match parse(&DslSource::new(text, scene, dt)) {
        Err(e) => Err((Rejection::Syntax, e.render(text))),
        Ok(phi) => checker.validate(text, &phi).map(|v| (phi, v)).map_err(|e| (Rejection::Validation, e)),
    };
    if let Err((kind, e)) = &res {
        checker.on_rejected(text, *kind, e);
    }
    res
}

/// Parses `stl_text` and validates it; while either fails, asks the syntax
/// checker for a revision, at most `cap` times. With `error_text` the text is
/// taken as already rejected with that message (for example an optimizer
/// infeasibility flag). Valid input costs no backend call.
#[allow(clippy::too_many_arguments)]
pub fn syncheq_fix<C: SynCheck + ?Sized>(
    stl_text: &str,
    error_text: Option<&str>,
    scene: &Scene,
    dt: f64,
    llm: &Llm<'_>,
    calls: &mut CallCounts,
    cap: usize,
    checker: &mut C,
) -> Result<SynFixed<C::Value>, SynCheqError> {
    let mut text = stl_text.to_string();
    let (mut kind, mut err) = match error_text {
        Some(e) => (Rejection::Validation, e.to_string()),
        None => match check(&text, scene, dt, checker) {
            Ok((formula, value)) => return Ok(SynFixed { formula, stl_text: text, value, attempts: Vec::new() }),
            Err(e) => e,
        },
    };
    let mut history = vec![ChatMessage::system(build_system_prompt(scene, PromptRole::SynCheQ))];
    let mut attempts = Vec::new();
    for _ in 0..cap {
        history.push(ChatMessage::user(format!("Specification:\n<STL>\n{text}\n</STL>\n\nError:\n{err}")));
        let (call_index, reply) = match calls.ask(llm, Agent::SynCheQ, &history) {
            Ok(r) => r,
            Err(error) => return Err(SynCheqError::Backend { error, attempts }),
        };
        history.push(ChatMessage::assistant(reply.clone()));
        let mut attempt = SynAttempt { call_index, stl_in: text.clone(), error: err.clone(), reply: reply.clone(), rejected: None };
        checker.on_reply(&attempt);
        let outcome = match extract_stl_block(&reply) {
            Ok(revised) => {
                text = revised;
                check(&text, scene, dt, checker)
            }
            Err(_) => Err((Rejection::Syntax, "the reply contains no <STL> block".to_string())),
        };
        match outcome {
            Ok((formula, value)) => {
                attempts.push(attempt);
                return Ok(SynFixed { formula, stl_text: text, value, attempts });
            }
            Err((k, e)) => {
                attempt.rejected = Some(e.clone());
                attempts.push(attempt);
                (kind, err) = (k, e);
            }
        }
    }
    Err(SynCheqError::FailedAfterCap { attempts, last_error: err, last_kind: kind })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Judgement {
    pub verdict: Verdict,
    pub call_index: usize,
    pub prompt: String,
    pub reply: String,
}

/// Renders the planning conversation (without the system prompt).
pub fn render_conversation(history: &[ChatMessage]) -> String {
    let mut out = String::new();
    for m in history {
        let who = match m.role {
            Role::System => continue,
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        out.push_str(&format!("[{who}]\n{}\n", m.content.trim()));
    }
    out
}

/// Asks the semantics checker whether the analyzed path matches the task.
/// It sees both the raw task and the planning conversation.
pub fn semcheq_judge(
    task_text: &str,
    conversation: &[ChatMessage],
    report: &PathReport,
    scene: &Scene,
    llm: &Llm<'_>,
    calls: &mut CallCounts,
) -> Result<Judgement, BackendError> {
    let prompt = format!(
        "Mission:\n{}\n\nConversation with the planning assistant:\n{}\nPath report:\n{}",
        task_text.trim(),
        render_conversation(conversation),
        report.rendered_text
    );
    let messages = [ChatMessage::system(build_system_prompt(scene, PromptRole::SemCheQ)), ChatMessage::user(prompt.clone())];
    let (call_index, reply) = calls.ask(llm, Agent::SemCheQ, &messages)?;
    Ok(Judgement { verdict: parse_verdict(&reply), call_index, prompt, reply })
}

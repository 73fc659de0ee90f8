//! Session state shared by the loops.

use serde::{Deserialize, Serialize};
use verna_core::scene::Scene;
use verna_core::Formula;
use verna_plan::{SolveResult, SolveStatus};

use crate::backend::{BackendError, LlmBackend, LlmRequest};
use crate::message::{Agent, AgentConfigs, ChatMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneShot,
    Conversation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Natural language to STL, then the optimizer.
    Verna,
    /// Waypoints straight from the planning assistant.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    AwaitingUser,
    Planning,
    AwaitingDecision,
    Accepted,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoopCounters {
    /// Planning-assistant calls.
    pub loop1: usize,
    /// Syntax-checker calls.
    pub loop2: usize,
    /// Semantic-check rounds that did not end aligned.
    pub loop3: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub loop1: usize,
    pub loop2: usize,
    pub loop3: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { loop1: 3, loop2: 3, loop3: 2 }
    }
}

/// Backend plus per-agent configuration.
#[derive(Clone, Copy)]
pub struct Llm<'a> {
    pub backend: &'a dyn LlmBackend,
    pub configs: &'a AgentConfigs,
}

/// Per-agent call indices of one session; they key scripted replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallCounts([usize; 3]);

impl CallCounts {
    fn slot(agent: Agent) -> usize {
        match agent {
            Agent::Pa => 0,
            Agent::SynCheQ => 1,
            Agent::SemCheQ => 2,
        }
    }

    pub fn get(&self, agent: Agent) -> usize {
        self.0[Self::slot(agent)]
    }

    /// Sends `messages` as the next call of `agent`; the index advances only
    /// when the backend answers.
    pub fn ask(&mut self, llm: &Llm<'_>, agent: Agent, messages: &[ChatMessage]) -> Result<(usize, String), BackendError> {
        let call_index = self.get(agent);
        let req = LlmRequest { agent, call_index, messages, config: llm.configs.get(agent) };
        let reply = llm.backend.send(&req)?;
        self.0[Self::slot(agent)] += 1;
        log::debug!("{agent} call {call_index}: {} chars", reply.len());
        Ok((call_index, reply))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEvent {
    /// `input` is the last message sent.
    Call { agent: Agent, call_index: usize, input: String, reply: String },
    ParseError { stl_text: String, error: String },
    Solve { stl_text: String, status: SolveStatus, message: String, objective: f64, robustness: f64 },
    Report { text: String },
    Note { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub loop_no: u8,
    #[serde(flatten)]
    pub event: TranscriptEvent,
}

pub struct SessionState {
    pub scene: Scene,
    /// First user message of the session.
    pub task_text: String,
    pub mode: Mode,
    pub kind: PlannerKind,
    pub status: Status,
    pub pa_history: Vec<ChatMessage>,
    pub syncheq_history: Vec<ChatMessage>,
    pub semcheq_history: Vec<ChatMessage>,
    pub candidate_text: Option<String>,
    pub candidate_stl: Option<Formula>,
    pub candidate_result: Option<SolveResult>,
    pub counters: LoopCounters,
    pub calls: CallCounts,
    pub transcript: Vec<TranscriptEntry>,
    /// Next message for the planning assistant.
    pub pending: Option<String>,
}

impl SessionState {
    pub fn new(scene: Scene, mode: Mode, kind: PlannerKind) -> Self {
        SessionState {
            scene,
            task_text: String::new(),
            mode,
            kind,
            status: Status::AwaitingUser,
            pa_history: Vec::new(),
            syncheq_history: Vec::new(),
            semcheq_history: Vec::new(),
            candidate_text: None,
            candidate_stl: None,
            candidate_result: None,
            counters: LoopCounters::default(),
            calls: CallCounts::default(),
            transcript: Vec::new(),
            pending: None,
        }
    }

    /// Session with the task already submitted.
    pub fn with_task(scene: Scene, task: &str, mode: Mode, kind: PlannerKind) -> Self {
        let mut s = Self::new(scene, mode, kind);
        s.submit_user_message(task);
        s
    }

    /// Queues a user message; the first one becomes the task.
    pub fn submit_user_message(&mut self, text: &str) {
        if self.task_text.is_empty() {
            self.task_text = text.to_string();
        }
        self.pending = Some(text.to_string());
    }

    /// Accepting closes the session; rejecting queues `comment` (or a generic
    /// request for another plan) for the planning assistant.
    pub fn decide(&mut self, accept: bool, comment: Option<&str>) -> Result<(), String> {
        if self.status != Status::AwaitingDecision {
            return Err(format!("no plan awaiting a decision (status {:?})", self.status));
        }
        if accept {
            self.status = Status::Accepted;
        } else {
            let msg = match comment.map(str::trim) {
                Some(c) if !c.is_empty() => c.to_string(),
                _ => "I reject the proposed path. Please propose a different specification.".to_string(),
            };
            self.pending = Some(msg);
            self.candidate_result = None;
            self.status = Status::AwaitingUser;
        }
        Ok(())
    }

    pub fn log(&mut self, loop_no: u8, event: TranscriptEvent) {
        self.transcript.push(TranscriptEntry { loop_no, event });
    }

    /// Number of backend calls in the transcript attributed to each loop.
    pub fn calls_per_loop(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for e in &self.transcript {
            if matches!(e.event, TranscriptEvent::Call { .. }) && (1..=3).contains(&e.loop_no) {
                n[e.loop_no as usize - 1] += 1;
            }
        }
        n
    }
}

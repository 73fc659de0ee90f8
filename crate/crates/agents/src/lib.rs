//! The LLM side of the verna planner: planning assistant, syntax checker,
//! semantics checker and path analyzer, their prompts and backends, and the
//! three correction loops around the trajectory optimizer.
//!
//! Replies are read through fixed delimiters: `<STL>...</STL>` for
//! specifications, `<WAYPOINTS>...</WAYPOINTS>` for the baseline planner and a
//! leading `ALIGNED` or `ADVICE:` for semantic verdicts.

pub mod agents;
pub mod backend;
pub mod fixtures;
pub mod message;
pub mod paz;
pub mod pipeline;
pub mod prompt;
pub mod reply;
pub mod session;

pub use agents::{conventional_pa_step, pa_step, semcheq_judge, syncheq_fix, SynCheck, SynCheqError};
pub use backend::{BackendError, FixtureEntry, LiveBackend, LlmBackend, LlmRequest, RecordingBackend, ScriptedBackend};
pub use message::{Agent, AgentConfig, AgentConfigs, ChatMessage, Role};
pub use paz::{paz_describe, Containment, PathReport};
pub use pipeline::{run_conventional, run_pipeline, run_pipeline_observed, FailReason, Failure, PipelineEvent, PlanOutcome, Planner};
pub use prompt::{build_system_prompt, PromptRole};
pub use reply::Verdict;
pub use session::{Caps, Llm, LoopCounters, Mode, PlannerKind, SessionState, Status};

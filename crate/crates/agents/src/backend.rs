//! LLM backends: live chat-completions endpoint, scripted replay and a
//! recorder that turns live sessions into replay fixtures.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::message::{Agent, AgentConfig, ChatMessage};

/// Environment variable holding the bearer token of the live backend.
pub const KEY_ENV: &str = "VERNA_LLM_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// `call_index` counts earlier calls to the same agent within one session.
#[derive(Debug, Clone, Copy)]
pub struct LlmRequest<'a> {
    pub agent: Agent,
    pub call_index: usize,
    pub messages: &'a [ChatMessage],
    pub config: &'a AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("no scripted reply for {agent} call {call_index}")]
    NoScriptedReply { agent: Agent, call_index: usize },
    #[error("missing API key: set {KEY_ENV}")]
    MissingKey,
    #[error("endpoint rejected the credentials (HTTP {0})")]
    Auth(u16),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected reply: {0}")]
    Malformed(String),
    #[error("fixture: {0}")]
    Fixture(String),
}

/// Shared by concurrent sessions, hence `Send + Sync`.
pub trait LlmBackend: Send + Sync {
    fn send(&self, req: &LlmRequest<'_>) -> Result<String, BackendError>;

    fn name(&self) -> String;
}

/// One replayable reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub agent: Agent,
    pub call_index: usize,
    pub reply: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    label: String,
    replies: HashMap<(Agent, usize), String>,
}

impl ScriptedBackend {
    pub fn from_entries(label: impl Into<String>, entries: Vec<FixtureEntry>) -> Result<Self, BackendError> {
        let mut replies = HashMap::new();
        for e in entries {
            if replies.insert((e.agent, e.call_index), e.reply).is_some() {
                return Err(BackendError::Fixture(format!("duplicate entry for {} call {}", e.agent, e.call_index)));
            }
        }
        Ok(ScriptedBackend { label: label.into(), replies })
    }

    pub fn from_json(label: impl Into<String>, text: &str) -> Result<Self, BackendError> {
        let entries: Vec<FixtureEntry> = serde_json::from_str(text).map_err(|e| BackendError::Fixture(e.to_string()))?;
        Self::from_entries(label, entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(path.display().to_string(), &text)
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl LlmBackend for ScriptedBackend {
    fn send(&self, req: &LlmRequest<'_>) -> Result<String, BackendError> {
        self.replies
            .get(&(req.agent, req.call_index))
            .cloned()
            .ok_or(BackendError::NoScriptedReply { agent: req.agent, call_index: req.call_index })
    }

    fn name(&self) -> String {
        format!("scripted:{}", self.label)
    }
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
#[derive(Debug)]
pub struct LiveBackend {
    base_url: String,
    key: String,
    http: ureq::Agent,
}

impl LiveBackend {
    pub fn new(base_url: impl Into<String>, key: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        LiveBackend { base_url: base_url.into().trim_end_matches('/').to_string(), key: key.into(), http: ureq::Agent::new_with_config(config) }
    }

    /// Reads the key from [`KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        match std::env::var(KEY_ENV) {
            Ok(k) if !k.trim().is_empty() => Ok(Self::new(base_url, k.trim(), timeout)),
            _ => Err(BackendError::MissingKey),
        }
    }
}

impl LlmBackend for LiveBackend {
    fn send(&self, req: &LlmRequest<'_>) -> Result<String, BackendError> {
        let body = json!({
            "model": req.config.model_name,
            "messages": req.messages,
            "temperature": req.config.temperature,
            "max_tokens": req.config.max_reply_tokens,
        });
        let mut resp = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .header("Authorization", format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(status)),
            _ => return Err(BackendError::Status { status, body: text.chars().take(300).collect() }),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }

    fn name(&self) -> String {
        format!("live:{}", self.base_url)
    }
}

/// Forwards to `inner` and keeps every successful reply as a fixture entry.
/// Record one session at a time: entries are keyed by per-session call index.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded entries ordered by agent and call index.
    pub fn entries(&self) -> Vec<FixtureEntry> {
        let mut v = self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone();
        v.sort_by_key(|a| (a.agent, a.call_index));
        v
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.entries()).expect("entries serialize");
        std::fs::write(path, text + "\n")
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn send(&self, req: &LlmRequest<'_>) -> Result<String, BackendError> {
        let reply = self.inner.send(req)?;
        let entry = FixtureEntry { agent: req.agent, call_index: req.call_index, reply: reply.clone() };
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
        Ok(reply)
    }

    fn name(&self) -> String {
        format!("recording:{}", self.inner.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(agent: Agent, call_index: usize, cfg: &'a AgentConfig) -> LlmRequest<'a> {
        LlmRequest { agent, call_index, messages: &[], config: cfg }
    }

    #[test]
    fn scripted_replays_by_agent_and_index() {
        let b = ScriptedBackend::from_json(
            "t",
            r#"[{"agent":"pa","call_index":0,"reply":"a"},{"agent":"pa","call_index":1,"reply":"b"},{"agent":"semcheq","call_index":0,"reply":"ALIGNED"}]"#,
        )
        .unwrap();
        let cfg = AgentConfig::defaults_for(Agent::Pa);
        assert_eq!(b.send(&req(Agent::Pa, 1, &cfg)).unwrap(), "b");
        assert_eq!(b.send(&req(Agent::Pa, 1, &cfg)).unwrap(), "b");
        assert_eq!(b.send(&req(Agent::SemCheQ, 0, &cfg)).unwrap(), "ALIGNED");
        assert_eq!(b.send(&req(Agent::SynCheQ, 0, &cfg)), Err(BackendError::NoScriptedReply { agent: Agent::SynCheQ, call_index: 0 }));
    }

    #[test]
    fn duplicate_fixture_entries_are_rejected() {
        let e = FixtureEntry { agent: Agent::Pa, call_index: 0, reply: "x".into() };
        assert!(ScriptedBackend::from_entries("t", vec![e.clone(), e]).is_err());
        assert!(ScriptedBackend::from_json("t", r#"[{"agent":"planner","call_index":0,"reply":""}]"#).is_err());
    }

    #[test]
    fn recorder_produces_a_replayable_fixture() {
        let inner = ScriptedBackend::from_entries(
            "t",
            vec![
                FixtureEntry { agent: Agent::SemCheQ, call_index: 0, reply: "ALIGNED".into() },
                FixtureEntry { agent: Agent::Pa, call_index: 0, reply: "q".into() },
            ],
        )
        .unwrap();
        let rec = RecordingBackend::new(inner);
        let cfg = AgentConfig::defaults_for(Agent::Pa);
        rec.send(&req(Agent::SemCheQ, 0, &cfg)).unwrap();
        rec.send(&req(Agent::Pa, 0, &cfg)).unwrap();
        assert!(rec.send(&req(Agent::Pa, 1, &cfg)).is_err());
        let entries = rec.entries();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].agent, Agent::Pa);
        let replay = ScriptedBackend::from_entries("r", entries).unwrap();
        assert_eq!(replay.send(&req(Agent::Pa, 0, &cfg)).unwrap(), "q");
    }
}

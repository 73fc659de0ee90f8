//! Chat messages and per-agent configuration.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }

    /// Empty content is replaced by a single space so the message stays
    /// valid for chat endpoints that reject empty strings.
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let mut content = content.into();
        if content.is_empty() {
            content.push(' ');
        }
        ChatMessage { role, content }
    }
}

/// The LLM-backed agents. Fixture files key replies by [`Agent::id`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    /// Planning assistant (STL or, in conventional mode, waypoints).
    Pa,
    SynCheQ,
    SemCheQ,
}

impl Agent {
    pub const ALL: [Agent; 3] = [Agent::Pa, Agent::SynCheQ, Agent::SemCheQ];

    pub fn id(self) -> &'static str {
        match self {
            Agent::Pa => "pa",
            Agent::SynCheQ => "syncheq",
            Agent::SemCheQ => "semcheq",
        }
    }

    pub fn from_id(id: &str) -> Option<Agent> {
        Agent::ALL.into_iter().find(|a| a.id() == id)
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub backend_id: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_reply_tokens: u32,
}

impl AgentConfig {
    pub fn defaults_for(agent: Agent) -> Self {
        let temperature = match agent {
            Agent::Pa => 0.3,
            Agent::SynCheQ | Agent::SemCheQ => 0.0,
        };
        AgentConfig { backend_id: "default".into(), model_name: "gpt-4o".into(), temperature, max_reply_tokens: 2048 }
    }
}

/// One configuration per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfigs {
    pub pa: AgentConfig,
    pub syncheq: AgentConfig,
    pub semcheq: AgentConfig,
}

impl Default for AgentConfigs {
    fn default() -> Self {
        AgentConfigs {
            pa: AgentConfig::defaults_for(Agent::Pa),
            syncheq: AgentConfig::defaults_for(Agent::SynCheQ),
            semcheq: AgentConfig::defaults_for(Agent::SemCheQ),
        }
    }
}

impl AgentConfigs {
    pub fn get(&self, agent: Agent) -> &AgentConfig {
        match agent {
            Agent::Pa => &self.pa,
            Agent::SynCheQ => &self.syncheq,
            Agent::SemCheQ => &self.semcheq,
        }
    }

    /// Same model for every agent, keeping the per-agent temperatures.
    pub fn with_model(mut self, model: &str) -> Self {
        for c in [&mut self.pa, &mut self.syncheq, &mut self.semcheq] {
            c.model_name = model.to_string();
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_temperatures() {
        let c = AgentConfigs::default();
        assert_eq!((c.pa.temperature, c.syncheq.temperature, c.semcheq.temperature), (0.3, 0.0, 0.0));
    }

    #[test]
    fn agent_ids_round_trip() {
        for a in Agent::ALL {
            assert_eq!(Agent::from_id(a.id()), Some(a));
        }
        assert_eq!(serde_json::to_string(&Agent::SynCheQ).unwrap(), "\"syncheq\"");
        assert_eq!(Agent::from_id("planner"), None);
    }

    #[test]
    fn content_is_never_empty() {
        assert_eq!(ChatMessage::user("").content, " ");
    }
}

//! Rule-driven mock backend.

use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::model::AgentId;

/// Token present in every machine-written text of the bundled toy corpus.
pub const TOY_SENTINEL: &str = "[[MGT]]";

/// First matching rule wins. A rule matches when its agent (if any) equals
/// the request's agent tag and its marker (if any) occurs anywhere in the
/// request's messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub agent: Option<AgentId>,
    #[serde(default)]
    pub contains: Option<String>,
    pub response: String,
}

impl ScriptRule {
    pub fn contains(marker: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            agent: None,
            contains: Some(marker.into()),
            response: response.into(),
        }
    }

    pub fn fallback(response: impl Into<String>) -> Self {
        Self {
            agent: None,
            contains: None,
            response: response.into(),
        }
    }

    pub fn for_agent(mut self, agent: AgentId) -> Self {
        self.agent = Some(agent);
        self
    }

    fn matches(&self, agent: Option<AgentId>, text: &str) -> bool {
        self.agent.is_none_or(|a| Some(a) == agent)
            && self.contains.as_deref().is_none_or(|m| text.contains(m))
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self { rules }
    }

    /// Loads rules from a JSON array of `{agent?, contains?, response}` objects.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        let rules = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Ok(Self::new(rules))
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }

    /// Prepends higher-priority rules.
    pub fn with_overrides(mut self, rules: impl IntoIterator<Item = ScriptRule>) -> Self {
        let mut merged: Vec<ScriptRule> = rules.into_iter().collect();
        merged.append(&mut self.rules);
        self.rules = merged;
        self
    }

    /// Script that labels the toy corpus perfectly: profiling agents lean
    /// MACHINE iff the text carries [`TOY_SENTINEL`], and the downstream
    /// agents echo whatever leaning the profiles carry.
    pub fn toy() -> Self {
        let profile_agents = [
            (AgentId::Ls, "Sentence lengths are"),
            (AgentId::Sc, "Topic development is"),
            (AgentId::Rl, "The argument structure is"),
        ];
        let mut rules = Vec::new();
        for (agent, lead) in profile_agents {
            rules.push(
                ScriptRule::contains(
                    TOY_SENTINEL,
                    format!("{lead} uniform and conspicuously polished throughout.\nLEANING: MACHINE"),
                )
                .for_agent(agent),
            );
            rules.push(
                ScriptRule::fallback(format!(
                    "{lead} uneven in a way typical of spontaneous human writing.\nLEANING: HUMAN"
                ))
                .for_agent(agent),
            );
        }
        rules.push(
            ScriptRule::fallback(
                "The profiles could be over-reading regularities that a careful writer might also produce.",
            )
            .for_agent(AgentId::Gm),
        );
        rules.push(
            ScriptRule::contains(
                "Leaning: MACHINE",
                "The challenge does not explain away the uniformity.\nLEANING: MACHINE",
            )
            .for_agent(AgentId::De),
        );
        rules.push(
            ScriptRule::fallback("The challenge does not overturn the evidence.\nLEANING: HUMAN")
                .for_agent(AgentId::De),
        );
        rules.push(
            ScriptRule::contains(
                "Leaning: MACHINE",
                "The evidence consistently points to generation.\nVERDICT: MACHINE\nCONFIDENCE: 0.9",
            )
            .for_agent(AgentId::Sj),
        );
        rules.push(
            ScriptRule::fallback(
                "The evidence consistently points to a human author.\nVERDICT: HUMAN\nCONFIDENCE: 0.9",
            )
            .for_agent(AgentId::Sj),
        );
        Self::new(rules)
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "mock:scripted"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let agent = request.agent();
        let text = request.full_text();
        self.rules
            .iter()
            .find(|r| r.matches(agent, &text))
            .map(|r| ChatResponse::text(r.response.clone()))
            .ok_or_else(|| {
                GatewayError::InvalidRequest(format!(
                    "no scripted rule matched request for agent {}",
                    agent.map_or("-", AgentId::code)
                ))
            })
    }
}

//! Chat-completion gateway.
//!
//! Every agent talks to an LLM through [`ChatBackend`]. Backends are
//! interchangeable and selected by name through [`BackendRegistry`]:
//!
//! - `live`: OpenAI-compatible HTTP endpoint with retry and backoff
//! - `mock:scripted`: rule-based canned responses
//! - `mock:counting`: per-agent call counting with minimal valid outputs
//! - `replay:<path>`: serves responses from a recorded cassette
//!
//! [`CachingBackend`] and [`RecordingBackend`] wrap any other backend.

mod cache;
mod cassette;
mod counting;
mod live;
mod metered;
mod registry;
mod scripted;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{AgentId, SamplingParams};

pub use cache::CachingBackend;
pub use cassette::{CassetteEntry, RecordingBackend, ReplayBackend};
pub use counting::{CallEvent, CountingBackend};
pub use metered::MeteredBackend;
pub use live::{LiveBackend, LiveSettings, RetryPolicy, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use registry::{BackendFactory, BackendRegistry, BackendSettings};
pub use scripted::{ScriptRule, ScriptedBackend, TOY_SENTINEL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API returned HTTP {status}: {body}")]
    Api { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay miss: key {key} not in cassette")]
    ReplayMiss { key: String },
    #[error("cassette I/O error: {0}")]
    Cassette(String),
    #[error("cache I/O error: {0}")]
    Cache(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
}

impl GatewayError {
    pub fn is_replay_miss(&self) -> bool {
        matches!(self, GatewayError::ReplayMiss { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub sampling: SamplingParams,
}

impl ChatRequest {
    pub fn new(
        model_id: impl Into<String>,
        messages: Vec<ChatMessage>,
        sampling: SamplingParams,
    ) -> Result<Self, GatewayError> {
        let req = Self {
            model_id: model_id.into(),
            messages,
            sampling,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| GatewayError::InvalidRequest("no messages".into()))?;
        if first.role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if let Some(m) = self
            .messages
            .iter()
            .find(|m| m.role != Role::Assistant && m.content.is_empty())
        {
            return Err(GatewayError::InvalidRequest(format!(
                "empty {:?} message",
                m.role
            )));
        }
        Ok(())
    }

    pub fn system_prompt(&self) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
    }

    /// Agent named by the `[AGENT:xx]` tag on the first line of the system prompt.
    pub fn agent(&self) -> Option<AgentId> {
        let first_line = self.system_prompt()?.lines().next()?.trim();
        let code = first_line.strip_prefix("[AGENT:")?.strip_suffix(']')?;
        AgentId::from_code(code)
    }

    /// All message contents joined, for substring matching.
    pub fn full_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_seconds: f64,
    #[serde(default)]
    pub from_cache: bool,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
            latency_seconds: 0.0,
            from_cache: false,
        }
    }
}

/// A chat-completion backend.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    /// Short name for logs and reports.
    fn name(&self) -> &str;

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

pub type SharedBackend = Arc<dyn ChatBackend>;

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request).await
    }
}

/// Content digest identifying a request for caching and replay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Serialize)]
struct CanonicalRequest<'a> {
    model_id: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

/// SHA-256 over the canonical JSON form of the request, lowercase hex.
///
/// The canonical form has a fixed field order and uses the wire value of
/// top_p, so two configs that send identical bytes share a key.
pub fn cache_key(request: &ChatRequest) -> CacheKey {
    let wire = request.sampling.clamped();
    let canonical = CanonicalRequest {
        model_id: &request.model_id,
        messages: &request.messages,
        temperature: wire.temperature,
        top_p: wire.top_p,
        max_tokens: wire.max_tokens,
    };
    let bytes = serde_json::to_vec(&canonical).expect("request serializes");
    CacheKey(hex::encode(Sha256::digest(&bytes)))
}

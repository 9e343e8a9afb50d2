//! Backend that counts calls per agent and returns minimal valid outputs.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::model::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallEvent {
    Started(Option<AgentId>),
    Finished(Option<AgentId>),
}

/// Counts completions keyed by the `[AGENT:xx]` tag of each request.
///
/// An optional per-call delay makes concurrent interleavings observable in
/// the event log.
#[derive(Debug, Default)]
pub struct CountingBackend {
    counts: Mutex<BTreeMap<AgentId, u64>>,
    untagged: AtomicU64,
    total: AtomicU64,
    requests: Mutex<Vec<ChatRequest>>,
    events: Mutex<Vec<CallEvent>>,
    delay: Option<Duration>,
}

impl CountingBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_delay(delay: Duration) -> Self {
        Self {
            delay: Some(delay),
            ..Self::default()
        }
    }

    /// Canned response for `agent` carrying the trailer its parser expects.
    pub fn canned_response(agent: Option<AgentId>) -> &'static str {
        match agent {
            Some(AgentId::Ls | AgentId::Sc | AgentId::Rl) => {
                "Minimal profile from the counting backend.\nLEANING: UNCERTAIN"
            }
            Some(AgentId::Gm) => "Minimal challenge from the counting backend.",
            Some(AgentId::De) => "Minimal refinement from the counting backend.\nLEANING: UNCERTAIN",
            Some(AgentId::Sj) => "Minimal judgment from the counting backend.\nVERDICT: HUMAN",
            None => "OK",
        }
    }

    pub fn count(&self, agent: AgentId) -> u64 {
        self.counts
            .lock()
            .expect("counts lock")
            .get(&agent)
            .copied()
            .unwrap_or(0)
    }

    /// Per-agent counts; agents never called are omitted.
    pub fn counts(&self) -> BTreeMap<AgentId, u64> {
        self.counts.lock().expect("counts lock").clone()
    }

    pub fn untagged(&self) -> u64 {
        self.untagged.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("requests lock").clone()
    }

    pub fn events(&self) -> Vec<CallEvent> {
        self.events.lock().expect("events lock").clone()
    }

    pub fn reset(&self) {
        self.counts.lock().expect("counts lock").clear();
        self.requests.lock().expect("requests lock").clear();
        self.events.lock().expect("events lock").clear();
        self.untagged.store(0, Ordering::SeqCst);
        self.total.store(0, Ordering::SeqCst);
    }
}

#[async_trait]
impl ChatBackend for CountingBackend {
    fn name(&self) -> &str {
        "mock:counting"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let agent = request.agent();
        self.total.fetch_add(1, Ordering::SeqCst);
        match agent {
            Some(a) => *self.counts.lock().expect("counts lock").entry(a).or_insert(0) += 1,
            None => {
                self.untagged.fetch_add(1, Ordering::SeqCst);
            }
        }
        self.requests
            .lock()
            .expect("requests lock")
            .push(request.clone());
        self.events
            .lock()
            .expect("events lock")
            .push(CallEvent::Started(agent));
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        self.events
            .lock()
            .expect("events lock")
            .push(CallEvent::Finished(agent));
        Ok(ChatResponse::text(Self::canned_response(agent)))
    }
}

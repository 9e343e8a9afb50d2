#![allow(dead_code)]

use std::sync::Mutex;

use async_trait::async_trait;
use camf_core::gateway::{ChatBackend, ChatRequest, ChatResponse, GatewayError, SharedBackend};

/// Records every request passing through to `inner`.
pub struct Spy {
    inner: SharedBackend,
    seen: Mutex<Vec<ChatRequest>>,
}

impl Spy {
    pub fn new(inner: SharedBackend) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }

    /// Lowercased full text of every request.
    pub fn prompt_texts(&self) -> Vec<String> {
        self.requests().iter().map(|r| r.full_text().to_lowercase()).collect()
    }
}

#[async_trait]
impl ChatBackend for Spy {
    fn name(&self) -> &str {
        "spy"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.complete(request).await
    }
}

/// Lowercase terms that must not appear in any prompt once a component is ablated.
pub fn forbidden_terms(variant: &str) -> &'static [&'static str] {
    match variant {
        "w/o LS" => &["stylistic", "[agent:ls]"],
        "w/o SC" => &["semantic", "coheren", "[agent:sc]"],
        "w/o RL" => &["logic", "[agent:rl]"],
        "w/o Adversarial Probing" => &[
            "adversarial",
            "probing",
            "generator-mimic",
            "detector-enhancer",
            "[agent:gm]",
            "[agent:de]",
        ],
        "w/o Synthesis Judge" => &["synthesis judge", "[agent:sj]"],
        _ => &[],
    }
}

//! Per-caller accounting wrapper.

use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::model::TokenUsage;

/// Borrows a shared backend and counts the completions issued through it.
pub struct MeteredBackend<'a> {
    inner: &'a dyn ChatBackend,
    calls: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

impl<'a> MeteredBackend<'a> {
    pub fn new(inner: &'a dyn ChatBackend) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
        }
    }

    /// Completions attempted, including ones that returned an error.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn usage(&self) -> TokenUsage {
        TokenUsage {
            prompt: self.prompt_tokens.load(Ordering::SeqCst),
            completion: self.completion_tokens.load(Ordering::SeqCst),
        }
    }
}

#[async_trait]
impl ChatBackend for MeteredBackend<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let resp = self.inner.complete(request).await?;
        self.prompt_tokens.fetch_add(resp.prompt_tokens, Ordering::SeqCst);
        self.completion_tokens
            .fetch_add(resp.completion_tokens, Ordering::SeqCst);
        Ok(resp)
    }
}

//! Content-addressed response cache: one JSON file per key under a directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tracing::trace;

use super::{cache_key, CacheKey, ChatBackend, ChatRequest, ChatResponse, GatewayError, SharedBackend};

#[derive(Serialize, Deserialize)]
struct CachedResponse {
    content: String,
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct CachingBackend {
    inner: SharedBackend,
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CachingBackend {
    pub fn new(inner: SharedBackend, dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            inner,
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }

    fn read(&self, path: &Path) -> Option<CachedResponse> {
        let bytes = std::fs::read(path).ok()?;
        // Unreadable entries are treated as misses and overwritten.
        serde_json::from_slice(&bytes).ok()
    }

    fn write(&self, path: &Path, entry: &CachedResponse) -> Result<(), GatewayError> {
        let err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        let mut line = serde_json::to_vec(entry).expect("cache entry serializes");
        line.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(err)?;
        tmp.write_all(&line).map_err(err)?;
        tmp.persist(path).map_err(|e| err(e.error))?;
        Ok(())
    }
}

#[async_trait]
impl ChatBackend for CachingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let started = Instant::now();
        let key = cache_key(request);
        let path = self.path_for(&key);
        if let Some(hit) = self.read(&path) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            trace!(%key, "cache hit");
            return Ok(ChatResponse {
                content: hit.content,
                prompt_tokens: hit.prompt_tokens,
                completion_tokens: hit.completion_tokens,
                latency_seconds: started.elapsed().as_secs_f64(),
                from_cache: true,
            });
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let resp = self.inner.complete(request).await?;
        self.write(
            &path,
            &CachedResponse {
                content: resp.content.clone(),
                prompt_tokens: resp.prompt_tokens,
                completion_tokens: resp.completion_tokens,
            },
        )?;
        Ok(resp)
    }
}

//! Record/replay cassettes: one JSON object per line, `{key, request, response}`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{cache_key, CacheKey, ChatBackend, ChatRequest, ChatResponse, GatewayError, SharedBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: CacheKey,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

impl CassetteEntry {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("cassette entry serializes");
        line.push('\n');
        line
    }
}

/// Passes every request through to `inner` and appends the exchange to a cassette.
pub struct RecordingBackend {
    inner: SharedBackend,
    path: PathBuf,
    file: Mutex<File>,
}

impl RecordingBackend {
    pub fn new(inner: SharedBackend, path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .map_err(|e| GatewayError::Cassette(format!("{}: {e}", parent.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[async_trait]
impl ChatBackend for RecordingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(request).await?;
        let entry = CassetteEntry {
            key: cache_key(request),
            request: request.clone(),
            response: ChatResponse {
                from_cache: false,
                ..response.clone()
            },
        };
        let mut file = self.file.lock().expect("cassette lock poisoned");
        file.write_all(entry.to_line().as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", self.path.display())))?;
        Ok(response)
    }
}

/// Serves responses from a cassette by key. Never touches the network.
#[derive(Debug)]
pub struct ReplayBackend {
    entries: HashMap<CacheKey, ChatResponse>,
    lookups: AtomicU64,
    misses: AtomicU64,
}

impl ReplayBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line =
                line.map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Cassette(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CassetteEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.key, e.response))
                .collect(),
            lookups: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookups(&self) -> u64 {
        self.lookups.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let started = Instant::now();
        self.lookups.fetch_add(1, Ordering::SeqCst);
        let key = cache_key(request);
        match self.entries.get(&key) {
            Some(resp) => Ok(ChatResponse {
                latency_seconds: started.elapsed().as_secs_f64(),
                from_cache: false,
                ..resp.clone()
            }),
            None => {
                self.misses.fetch_add(1, Ordering::SeqCst);
                Err(GatewayError::ReplayMiss {
                    key: key.to_string(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{ChatMessage, ScriptRule, ScriptedBackend};
    use crate::model::SamplingParams;

    fn request(text: &str) -> ChatRequest {
        ChatRequest::new(
            "m",
            vec![ChatMessage::system("[AGENT:SC]\nsys"), ChatMessage::user(text)],
            SamplingParams::default(),
        )
        .unwrap()
    }

    #[tokio::test]
    async fn record_then_replay_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.jsonl");
        let scripted = Arc::new(ScriptedBackend::new(vec![
            ScriptRule::contains("alpha", "first answer\nLEANING: HUMAN"),
            ScriptRule::fallback("ünïcode fallback ✓"),
        ]));
        let recorder = RecordingBackend::new(scripted, &path).unwrap();
        let mut recorded = Vec::new();
        for t in ["alpha", "beta", "gamma"] {
            recorded.push(recorder.complete(&request(t)).await.unwrap().content);
        }
        drop(recorder);

        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw.lines().count(), 3);
        assert!(raw.ends_with('\n') && !raw.contains('\r'));

        let replay = ReplayBackend::open(&path).unwrap();
        for (t, expected) in ["alpha", "beta", "gamma"].iter().zip(&recorded) {
            let got = replay.complete(&request(t)).await.unwrap();
            assert_eq!(got.content.as_bytes(), expected.as_bytes());
        }
        assert_eq!(replay.lookups(), 3);
    }

    #[tokio::test]
    async fn unknown_request_is_a_replay_miss() {
        let entry = CassetteEntry {
            key: cache_key(&request("known")),
            request: request("known"),
            response: ChatResponse::text("ok"),
        };
        let replay = ReplayBackend::from_entries([entry]);
        let err = replay.complete(&request("known, but edited")).await.unwrap_err();
        assert!(err.is_replay_miss());
        assert_eq!(replay.misses(), 1);
    }

    #[test]
    fn malformed_cassette_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\n{oops}\n").unwrap();
        let err = ReplayBackend::open(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}

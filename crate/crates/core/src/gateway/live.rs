//! OpenAI-compatible `/chat/completions` client.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, Role};

pub const API_KEY_ENV: &str = "CAMF_API_KEY";
pub const BASE_URL_ENV: &str = "CAMF_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// Exponential backoff: `base_delay * 2^(n-1)` before retry `n`, each delay
/// scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Nominal delay before the `retry`-th retry (1-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }

    fn jittered_delay(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry).as_secs_f64();
        let factor = if self.jitter > 0.0 {
            rand::rng().random_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * factor).max(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct LiveSettings {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for LiveSettings {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

impl LiveSettings {
    /// Reads the credential and base URL from the environment.
    pub fn from_env() -> Self {
        let base_url = std::env::var(BASE_URL_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|s| !s.is_empty());
        Self {
            base_url,
            api_key,
            ..Self::default()
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: Option<WireChoiceMessage>,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Builds the JSON body sent to `/chat/completions`.
pub(crate) fn wire_body(request: &ChatRequest) -> serde_json::Value {
    let messages = request
        .messages
        .iter()
        .map(|m| WireMessage {
            role: match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            },
            content: &m.content,
        })
        .collect();
    let body = WireRequest {
        model: &request.model_id,
        messages,
        temperature: request.sampling.temperature,
        top_p: request.sampling.wire_top_p(),
        max_tokens: request.sampling.max_tokens,
    };
    serde_json::to_value(body).expect("wire request serializes")
}

fn parse_wire_response(body: &str) -> Result<(String, u64, u64), GatewayError> {
    let parsed: WireResponse = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let content = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message)
        .and_then(|m| m.content)
        .ok_or_else(|| {
            GatewayError::MalformedResponse("missing choices[0].message.content".into())
        })?;
    let (p, c) = parsed
        .usage
        .map(|u| (u.prompt_tokens, u.completion_tokens))
        .unwrap_or((0, 0));
    Ok((content, p, c))
}

enum Attempt {
    Done(Result<ChatResponse, GatewayError>),
    Retry(GatewayError),
}

pub struct LiveBackend {
    client: reqwest::Client,
    endpoint: String,
    api_key: String,
    retry: RetryPolicy,
}

impl LiveBackend {
    pub fn new(settings: LiveSettings) -> Result<Self, GatewayError> {
        let api_key = settings
            .api_key
            .ok_or_else(|| GatewayError::Auth(format!("{API_KEY_ENV} is not set")))?;
        let client = reqwest::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", settings.base_url.trim_end_matches('/'));
        Ok(Self {
            client,
            endpoint,
            api_key,
            retry: settings.retry,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    async fn attempt(&self, body: &serde_json::Value, started: Instant) -> Attempt {
        let sent = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await;
        let resp = match sent {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() => {
                return Attempt::Retry(GatewayError::Transport(e.to_string()))
            }
            Err(e) => return Attempt::Done(Err(GatewayError::Transport(e.to_string()))),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(GatewayError::Transport(e.to_string())),
        };
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Attempt::Done(Err(GatewayError::Auth(format!("HTTP {status}"))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Attempt::Retry(GatewayError::RateLimited { attempts: 0 });
        }
        if status.is_server_error() {
            return Attempt::Retry(GatewayError::Api {
                status: status.as_u16(),
                body: text,
            });
        }
        if !status.is_success() {
            return Attempt::Done(Err(GatewayError::Api {
                status: status.as_u16(),
                body: text,
            }));
        }
        Attempt::Done(parse_wire_response(&text).map(|(content, p, c)| ChatResponse {
            content,
            prompt_tokens: p,
            completion_tokens: c,
            latency_seconds: started.elapsed().as_secs_f64(),
            from_cache: false,
        }))
    }
}

#[async_trait]
impl ChatBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let body = wire_body(request);
        let started = Instant::now();
        let attempts = self.retry.max_attempts.max(1);
        let mut last = GatewayError::Transport("no attempt made".into());
        for attempt in 1..=attempts {
            match self.attempt(&body, started).await {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => {
                    warn!(attempt, error = %err, "transient failure from {}", self.endpoint);
                    last = err;
                    if attempt < attempts {
                        let delay = self.retry.jittered_delay(attempt);
                        debug!(?delay, "backing off");
                        tokio::time::sleep(delay).await;
                    }
                }
            }
        }
        Err(match last {
            GatewayError::RateLimited { .. } => GatewayError::RateLimited { attempts },
            other => other,
        })
    }
}

//! OpenAI-compatible chat-completions client.
//!
//! Images travel as base64 PNG data URLs in `image_url` content parts. Rate
//! limiting (HTTP 429), server errors and transport failures are retried with
//! exponential backoff and jitter; 401/403 are fatal.

use std::fmt;
use std::io::Cursor;
use std::num::NonZeroU32;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cursorbench_core::seed::rng_for;
use governor::{DefaultDirectRateLimiter, Quota, RateLimiter};
use image::{ImageFormat, RgbImage};
use rand::Rng;
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::{Backend, BackendIdentity, CompletionRequest};
use crate::chat::{ChatTurn, Role};
use crate::error::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthStyle {
    /// `Authorization: Bearer <key>`
    #[default]
    Bearer,
    /// `api-key: <key>`, as Azure deployments expect.
    ApiKeyHeader,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpBackendConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub auth: AuthStyle,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    /// Shared across all workers using this backend.
    pub requests_per_second: Option<u32>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub request_timeout_ms: u64,
    /// Seeds the backoff jitter.
    pub seed: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: String::new(),
            api_key: None,
            auth: AuthStyle::Bearer,
            max_attempts: 4,
            base_delay_ms: 500,
            requests_per_second: None,
            temperature: Some(0.0),
            max_tokens: Some(1024),
            request_timeout_ms: 120_000,
            seed: 0,
        }
    }
}

impl fmt::Debug for HttpBackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackendConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("auth", &self.auth)
            .field("max_attempts", &self.max_attempts)
            .field("base_delay_ms", &self.base_delay_ms)
            .field("requests_per_second", &self.requests_per_second)
            .finish()
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::Client,
    limiter: Option<DefaultDirectRateLimiter>,
    retries: AtomicU64,
}

pub fn png_data_url(image: &RgbImage) -> Result<String, BackendError> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| BackendError::Config(format!("cannot encode image: {e}")))?;
    Ok(format!("data:image/png;base64,{}", STANDARD.encode(buf.into_inner())))
}

/// Chat-completions request body for `history`.
pub fn request_body(config: &HttpBackendConfig, history: &[ChatTurn]) -> Result<Value, BackendError> {
    let messages = history
        .iter()
        .map(|turn| {
            let content = match (&turn.image, turn.role) {
                (Some(img), Role::User) => json!([
                    { "type": "text", "text": turn.text },
                    { "type": "image_url", "image_url": { "url": png_data_url(img)? } },
                ]),
                _ => json!(turn.text),
            };
            Ok(json!({ "role": turn.role.as_str(), "content": content }))
        })
        .collect::<Result<Vec<_>, BackendError>>()?;
    let mut body = json!({ "model": config.model, "messages": messages });
    if let Some(t) = config.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(m) = config.max_tokens {
        body["max_tokens"] = json!(m);
    }
    Ok(body)
}

fn response_text(body: &Value) -> Result<String, BackendError> {
    let content = &body["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        Value::Null => Err(BackendError::Response("no choices[0].message.content".into())),
        other => Err(BackendError::Response(format!("unexpected content {other}"))),
    }
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        if config.model.is_empty() {
            return Err(BackendError::Config("model name is required".into()));
        }
        if config.max_attempts == 0 {
            return Err(BackendError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let limiter = match config.requests_per_second {
            Some(rps) => {
                let rps = NonZeroU32::new(rps).ok_or_else(|| BackendError::Config("requests_per_second must be positive".into()))?;
                Some(RateLimiter::direct(Quota::per_second(rps)))
            }
            None => None,
        };
        Ok(Self { config, client, limiter, retries: AtomicU64::new(0) })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let n = self.retries.fetch_add(1, Ordering::Relaxed);
        let jitter: f64 = rng_for(self.config.seed, &format!("http/backoff/{n}")).random_range(0.5..1.0);
        let base = self.config.base_delay_ms as f64 * 2f64.powi(attempt as i32 - 1);
        Duration::from_millis((base * jitter) as u64)
    }

    async fn send_once(&self, body: &Value) -> Result<Value, Attempt> {
        if let Some(limiter) = &self.limiter {
            limiter.until_ready().await;
        }
        let mut req = self.client.post(self.url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = match self.config.auth {
                AuthStyle::Bearer => req.bearer_auth(key),
                AuthStyle::ApiKeyHeader => req.header("api-key", key),
            };
        }
        let resp = req
            .send()
            .await
            .map_err(|e| Attempt::Retry(e.without_url().to_string(), None))?;
        let status = resp.status();
        if status.is_success() {
            return resp
                .json::<Value>()
                .await
                .map_err(|e| Attempt::Fail(BackendError::Response(e.without_url().to_string())));
        }
        let retry_after = resp
            .headers()
            .get(RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(|s| Duration::from_secs(s.min(60)));
        let detail: String = resp.text().await.unwrap_or_default().chars().take(200).collect();
        match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Err(Attempt::Fail(BackendError::Auth(format!("HTTP {status}"))))
            }
            s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => {
                Err(Attempt::Retry(format!("HTTP {status}"), retry_after))
            }
            _ => Err(Attempt::Fail(BackendError::Transport(format!("HTTP {status}: {detail}")))),
        }
    }
}

enum Attempt {
    Retry(String, Option<Duration>),
    Fail(BackendError),
}

#[async_trait]
impl Backend for HttpBackend {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            kind: "openai_compatible".into(),
            model: self.config.model.clone(),
            endpoint: Some(self.config.endpoint.clone()),
        }
    }

    async fn complete(&self, request: CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = request_body(&self.config, request.history)?;
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.send_once(&body).await {
                Ok(v) => return response_text(&v),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(reason, retry_after)) => {
                    tracing::warn!(sample = request.sample_id, turn = request.turn, attempt, %reason, "retrying request");
                    last = reason;
                    if attempt < self.config.max_attempts {
                        let delay = self.backoff(attempt).max(retry_after.unwrap_or_default());
                        tokio::time::sleep(delay).await;
                    }
                }
            }
        }
        Err(BackendError::Transport(format!(
            "giving up after {} attempts: {last}",
            self.config.max_attempts
        )))
    }
}

//! Client for chat-completions compatible HTTP endpoints.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use super::{BackendError, ChatBackend, Completion, Conversation, GenerationParams, Role, Usage};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

pub const ENV_ENDPOINT: &str = "DATADISC_API_URL";
pub const ENV_MODEL: &str = "DATADISC_MODEL";
pub const ENV_API_KEY: &str = "DATADISC_API_KEY";
pub const ENV_API_KEY_FALLBACK: &str = "OPENAI_API_KEY";

/// Exponential backoff with full jitter: before retry `n` (0-based) the client sleeps a
/// uniform random duration in `[0, base * factor^n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the jittered sleep before retry `retry` (0-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(retry as i32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }

    /// Reads model and credential from the environment. `endpoint` overrides
    /// `DATADISC_API_URL` when given.
    pub fn from_env(endpoint: Option<&str>) -> Result<Self, BackendError> {
        let endpoint = endpoint
            .map(str::to_owned)
            .or_else(|| std::env::var(ENV_ENDPOINT).ok())
            .unwrap_or_else(|| DEFAULT_ENDPOINT.to_owned());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_owned());
        let api_key = std::env::var(ENV_API_KEY)
            .or_else(|_| std::env::var(ENV_API_KEY_FALLBACK))
            .map_err(|_| {
                BackendError::Config(format!("set {ENV_API_KEY} to use an HTTP backend"))
            })?;
        Ok(Self::new(endpoint, model, api_key))
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
    max_tokens: u32,
}

/// Serializes the request body. Field order is fixed, so equal inputs give equal bytes.
pub fn request_body(model: &str, conversation: &Conversation, params: &GenerationParams) -> String {
    let messages = conversation
        .turns()
        .iter()
        .map(|t| WireMessage {
            role: match t.role() {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            },
            content: t.text(),
        })
        .collect();
    serde_json::to_string(&WireRequest {
        model,
        messages,
        temperature: params.temperature,
        max_tokens: params.max_tokens,
    })
    .expect("request serialization cannot fail")
}

/// Extracts `choices[0].message.content` and the reported token usage.
pub fn parse_response(body: &str, conversation: &Conversation) -> Result<(String, Usage), BackendError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let content = value
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .and_then(|c| c.pointer("/message/content"))
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))?;
    if content.is_empty() {
        return Err(BackendError::MalformedResponse("empty completion".into()));
    }
    let reported = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64);
    let usage = match (reported("prompt_tokens"), reported("completion_tokens")) {
        (Some(p), Some(c)) => Usage {
            prompt_tokens: p,
            completion_tokens: c,
            ..Usage::default()
        },
        _ => Usage {
            prompt_tokens: conversation
                .turns()
                .iter()
                .map(|t| t.text().split_whitespace().count() as u64)
                .sum(),
            completion_tokens: content.split_whitespace().count() as u64,
            approximate: true,
            ..Usage::default()
        },
    };
    Ok((content.to_owned(), usage))
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Stateless apart from the connection pool; safe to share between workers.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    sleep: Sleeper,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String, Usage),
    Retry(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            agent,
            sleep: Arc::new(std::thread::sleep),
        }
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, body: &str, conversation: &Conversation) -> Attempt {
        let response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .header("Content-Type", "application/json")
            .send(body);
        let response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = match response.into_body().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string())),
        };
        match status {
            200..=299 => match parse_response(&text, conversation) {
                Ok((content, usage)) => Attempt::Done(content, usage),
                Err(e) => Attempt::Fatal(e),
            },
            429 => Attempt::Retry(BackendError::RateLimited {
                attempts: self.config.retry.max_attempts,
            }),
            408 | 500..=599 => Attempt::Retry(BackendError::Transport(format!("HTTP {status}"))),
            _ => Attempt::Fatal(BackendError::Transport(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            ))),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        conversation: &Conversation,
        params: &GenerationParams,
    ) -> Result<Completion, BackendError> {
        if conversation.pending_user_text().is_none() {
            return Err(BackendError::InvalidConversation(
                "conversation must end with a user turn".into(),
            ));
        }
        let body = request_body(&self.config.model, conversation, params);
        let started = Instant::now();
        let policy = self.config.retry;
        let mut last = BackendError::Transport("no attempt made".into());
        for attempt in 0..policy.max_attempts.max(1) {
            if attempt > 0 {
                let ceiling = policy.ceiling(attempt - 1);
                let jitter = rand::thread_rng().gen_range(0.0..=1.0);
                (self.sleep)(ceiling.mul_f64(jitter));
            }
            match self.attempt(&body, conversation) {
                Attempt::Done(text, mut usage) => {
                    usage.wall_time = started.elapsed();
                    return Ok(Completion { text, usage });
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(last)
    }
}

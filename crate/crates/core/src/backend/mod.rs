//! Chat-completion backends and conversation state.

mod conversation;
mod http;
mod scripted;
mod usage;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conversation::{Conversation, Role, Turn};
pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use scripted::{load_transcript, ScriptedBackend, TranscriptEntry, SIMULATED_LATENCY};
pub use usage::{Meter, MeterReport, PriceTable, Usage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("scripted backend has no responses left")]
    Exhausted,
    #[error("scripted response expected the prompt to contain {expected:?}")]
    MatchFailed { expected: String },
    #[error("transcript line {line}: {reason}")]
    MalformedTranscript { line: usize, reason: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid conversation: {0}")]
    InvalidConversation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

impl GenerationParams {
    pub fn new(temperature: f64, max_tokens: u32) -> Result<Self, BackendError> {
        if !(0.0..=1.0).contains(&temperature) {
            return Err(BackendError::Config(format!(
                "temperature {temperature} outside [0, 1]"
            )));
        }
        if max_tokens == 0 {
            return Err(BackendError::Config("max_tokens must be positive".into()));
        }
        Ok(Self {
            temperature,
            max_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

/// A chat-completion model. The conversation must end with a user turn; the caller
/// appends the returned text as the assistant turn.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        conversation: &Conversation,
        params: &GenerationParams,
    ) -> Result<Completion, BackendError>;

    /// Whether responses depend on call order, which forces callers to issue requests
    /// one at a time.
    fn replays_in_order(&self) -> bool {
        false
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(
        &self,
        conversation: &Conversation,
        params: &GenerationParams,
    ) -> Result<Completion, BackendError> {
        (**self).complete(conversation, params)
    }

    fn replays_in_order(&self) -> bool {
        (**self).replays_in_order()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(
        &self,
        conversation: &Conversation,
        params: &GenerationParams,
    ) -> Result<Completion, BackendError> {
        (**self).complete(conversation, params)
    }

    fn replays_in_order(&self) -> bool {
        (**self).replays_in_order()
    }
}

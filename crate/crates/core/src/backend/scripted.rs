//! Replay backend driven by a JSON-lines transcript.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, ChatBackend, Completion, Conversation, GenerationParams, Usage};

/// Latency charged to every scripted completion so throughput figures stay defined
/// and reproducible.
pub const SIMULATED_LATENCY: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TranscriptEntry {
    /// When present, the final user turn must contain this substring.
    #[serde(rename = "match", default)]
    pub expect: Option<String>,
    pub response: String,
}

/// Returns recorded responses in order. Calls are serialized internally.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Mutex<VecDeque<TranscriptEntry>>,
    latency: Duration,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self {
            entries: Mutex::new(entries.into_iter().collect()),
            latency: SIMULATED_LATENCY,
        }
    }

    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(responses.into_iter().map(|r| TranscriptEntry {
            expect: None,
            response: r.into(),
        }))
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn remaining(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

/// Parses a JSON-lines transcript: `{"match"?: string, "response": string}` per line.
/// Blank lines are skipped; line numbers are 1-based.
pub fn load_transcript(source: &str) -> Result<ScriptedBackend, BackendError> {
    let mut entries = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| BackendError::MalformedTranscript {
            line: idx + 1,
            reason,
        };
        let entry: TranscriptEntry =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if entry.response.is_empty() {
            return Err(malformed("response is empty".into()));
        }
        entries.push(entry);
    }
    Ok(ScriptedBackend::new(entries))
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        conversation: &Conversation,
        _params: &GenerationParams,
    ) -> Result<Completion, BackendError> {
        let prompt = conversation.pending_user_text().ok_or_else(|| {
            BackendError::InvalidConversation("conversation must end with a user turn".into())
        })?;
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let entry = entries.front().ok_or(BackendError::Exhausted)?;
        if let Some(expected) = &entry.expect {
            if !prompt.contains(expected.as_str()) {
                return Err(BackendError::MatchFailed {
                    expected: expected.clone(),
                });
            }
        }
        let entry = entries.pop_front().expect("front checked above");
        let usage = Usage {
            prompt_tokens: conversation.turns().iter().map(|t| word_count(t.text())).sum(),
            completion_tokens: word_count(&entry.response),
            wall_time: self.latency,
            approximate: true,
        };
        Ok(Completion {
            text: entry.response,
            usage,
        })
    }

    fn replays_in_order(&self) -> bool {
        true
    }
}

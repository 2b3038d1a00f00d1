use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    role: Role,
    text: String,
}

impl Turn {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Chat history. An optional leading system turn, then strictly alternating
/// user and assistant turns starting with a user turn.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conversation {
    turns: Vec<Turn>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_system(text: impl Into<String>) -> Result<Self, BackendError> {
        let mut c = Self::new();
        let text = nonempty(text.into())?;
        c.turns.push(Turn {
            role: Role::System,
            text,
        });
        Ok(c)
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn last(&self) -> Option<&Turn> {
        self.turns.last()
    }

    /// Text of the final turn if it is a user turn.
    pub fn pending_user_text(&self) -> Option<&str> {
        self.last()
            .filter(|t| t.role == Role::User)
            .map(|t| t.text.as_str())
    }

    fn expected_next(&self) -> Role {
        match self.last().map(|t| t.role) {
            None | Some(Role::System) | Some(Role::Assistant) => Role::User,
            Some(Role::User) => Role::Assistant,
        }
    }

    fn push(&mut self, role: Role, text: String) -> Result<(), BackendError> {
        let expected = self.expected_next();
        if role != expected {
            return Err(BackendError::InvalidConversation(format!(
                "expected a {expected:?} turn, got {role:?}"
            )));
        }
        let text = nonempty(text)?;
        self.turns.push(Turn { role, text });
        Ok(())
    }

    pub fn push_user(&mut self, text: impl Into<String>) -> Result<(), BackendError> {
        self.push(Role::User, text.into())
    }

    pub fn push_assistant(&mut self, text: impl Into<String>) -> Result<(), BackendError> {
        self.push(Role::Assistant, text.into())
    }

    /// Copy of this conversation with the final turn's text replaced. Only the harness's
    /// history rewrite uses this; role order is unaffected.
    pub(crate) fn with_last_text(&self, text: String) -> Result<Self, BackendError> {
        let text = nonempty(text)?;
        let mut copy = self.clone();
        match copy.turns.last_mut() {
            Some(t) => t.text = text,
            None => {
                return Err(BackendError::InvalidConversation(
                    "conversation is empty".into(),
                ))
            }
        }
        Ok(copy)
    }
}

fn nonempty(text: String) -> Result<String, BackendError> {
    if text.is_empty() {
        return Err(BackendError::InvalidConversation("turn text is empty".into()));
    }
    Ok(text)
}

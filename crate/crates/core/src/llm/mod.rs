//! Chat backends and the target-command grammar.

mod command;
mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use command::{
    format_target_command, is_valid_user_id, parse_target_command, InvalidCommand, ParseFailure,
    ParseFailureReason, TargetCommand,
};
pub use mock::{
    FailureInjection, FailureMode, MockScript, MockTurn, ScriptUser, ScriptedMock, TrueTarget,
};
pub use remote::{RemoteChat, RemoteConfig, DEFAULT_API_KEY_ENV};

/// Prompt-part markers shared by the prompt templates and the scripted mock.
pub mod markers {
    pub const ENV_OPEN: &str = "[ENVIRONMENT]";
    pub const ENV_CLOSE: &str = "[/ENVIRONMENT]";
    pub const CONFIRMATION: &str = "[CONFIRMATION]";
    pub const FEEDBACK: &str = "[FEEDBACK]";

    /// Environment JSON of the last marked block in `text`, if any.
    pub fn environment_block(text: &str) -> Option<&str> {
        let start = text.rfind(ENV_OPEN)? + ENV_OPEN.len();
        let end = start + text[start..].find(ENV_CLOSE)?;
        Some(text[start..end].trim())
    }

    /// Splits a `[user]: text` utterance.
    pub fn speaker(text: &str) -> Option<(&str, &str)> {
        let rest = text.trim_start().strip_prefix('[')?;
        let (user, tail) = rest.split_once(']')?;
        let body = tail.trim_start().strip_prefix(':')?;
        if super::is_valid_user_id(user) {
            Some((user, body.trim()))
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self, ChatError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(ChatError::EmptyMessage);
        }
        Ok(Self { role, content })
    }

    pub fn system(content: impl Into<String>) -> Result<Self, ChatError> {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Result<Self, ChatError> {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Result<Self, ChatError> {
        Self::new(Role::Assistant, content)
    }
}

/// Append-only conversation that always opens with a system message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transcript {
    messages: Vec<ChatMessage>,
}

impl Transcript {
    pub fn new(system: ChatMessage) -> Result<Self, ChatError> {
        if system.role != Role::System {
            return Err(ChatError::InvalidTranscript(
                "first message must be a system message".into(),
            ));
        }
        Ok(Self {
            messages: vec![system],
        })
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.messages.push(message);
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&ChatMessage> {
        self.messages.last()
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("message content is empty")]
    EmptyMessage,
    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("chat endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
}

/// A chat-completions provider. Implementations are shared across sessions.
pub trait ChatBackend: Send + Sync {
    /// Produces one assistant message for `transcript` without mutating it.
    fn complete(&self, transcript: &Transcript) -> Result<ChatMessage, ChatError>;

    fn kind(&self) -> &'static str;
}

/// Convenience wrapper enforcing the transcript precondition.
pub fn complete(backend: &dyn ChatBackend, transcript: &Transcript) -> Result<ChatMessage, ChatError> {
    match transcript.messages().first() {
        Some(m) if m.role == Role::System => {}
        _ => {
            return Err(ChatError::InvalidTranscript(
                "transcript must begin with a system message".into(),
            ))
        }
    }
    let reply = backend.complete(transcript)?;
    if reply.role != Role::Assistant {
        return Err(ChatError::Malformed(format!("expected assistant role, got {:?}", reply.role)));
    }
    Ok(reply)
}

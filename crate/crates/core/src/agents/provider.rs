use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dcc::ParamValue;
use crate::hash::fnv1a64_hex;

pub const VISUALIZER: &str = "visualizer";
pub const PLANNER: &str = "planner";
pub const MANAGER: &str = "manager";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::Assistant,
            content: content.into(),
        }
    }
}

/// Candidate content as proposed by a provider, before an id and thumbnail
/// are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDraft {
    pub params: BTreeMap<String, ParamValue>,
    pub descriptor: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderReply {
    Text(String),
    ToolCall { tool: String, args: Map<String, Value> },
    Candidates(Vec<CandidateDraft>),
}

impl ProviderReply {
    pub fn kind(&self) -> &'static str {
        match self {
            ProviderReply::Text(_) => "text",
            ProviderReply::ToolCall { .. } => "tool call",
            ProviderReply::Candidates(_) => "candidate batch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no scripted reply for role '{role}' at ordinal {ordinal} (context hash {context_hash})")]
    NoMatch {
        role: String,
        ordinal: usize,
        context_hash: String,
    },
}

/// A model backend. Implementations used in tests must be pure functions of
/// `(role, context)`.
pub trait Provider: Send + Sync {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        (**self).complete(role, context)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        (**self).complete(role, context)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        (**self).complete(role, context)
    }
}

/// Position of a context in its conversation: the number of user messages
/// minus one.
pub fn ordinal(context: &[ChatMessage]) -> usize {
    context
        .iter()
        .filter(|m| m.role == MessageRole::User)
        .count()
        .saturating_sub(1)
}

/// FNV-1a-64 over `role \x1f content \x1e` for each message, as 16 hex digits.
pub fn context_hash(context: &[ChatMessage]) -> String {
    let mut bytes = Vec::new();
    for m in context {
        let role = match m.role {
            MessageRole::System => "system",
            MessageRole::User => "user",
            MessageRole::Assistant => "assistant",
        };
        bytes.extend_from_slice(role.as_bytes());
        bytes.push(0x1f);
        bytes.extend_from_slice(m.content.as_bytes());
        bytes.push(0x1e);
    }
    fnv1a64_hex(&bytes)
}

//! Deterministic providers driven by fixture documents.
//!
//! ```json
//! {
//!   "schema": "provider-fixture/1",
//!   "entries": [
//!     {"role": "visualizer", "ordinal": 0, "reply": {"candidates": [
//!       {"params": {"height": 2}, "descriptor": "short box"}
//!     ]}},
//!     {"role": "planner", "contains": "r1s1", "reply": {"plan": [
//!       {"description": "base", "console_cmds": ["add cube base height={{height}}"]}
//!     ]}},
//!     {"role": "manager", "reply": {"tool_call": {"tool": "run_cmd_on_default_console", "args": {"cmd": "snapshot"}}}},
//!     {"role": "inspector", "context_hash": "0123456789abcdef", "reply": {"text": "pass"}}
//!   ]
//! }
//! ```
//!
//! An entry matches when its role equals the requested role and every
//! selector it carries holds: `ordinal` (user messages in the context minus
//! one), `context_hash` (see [`super::provider::context_hash`]) and
//! `contains` (substring of the last user message). The first matching entry
//! wins. A `plan` reply is shorthand for a text reply holding
//! `{"steps": [...]}`.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::provider::{context_hash, ordinal, CandidateDraft, ChatMessage, MessageRole, Provider, ProviderError, ProviderReply};

pub const FIXTURE_SCHEMA: &str = "provider-fixture/1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("provider fixture: {0}")]
pub struct FixtureError(pub String);

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    schema: String,
    entries: Vec<RawEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    role: String,
    #[serde(default)]
    ordinal: Option<usize>,
    #[serde(default)]
    context_hash: Option<String>,
    #[serde(default)]
    contains: Option<String>,
    reply: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureEntry {
    pub role: String,
    pub ordinal: Option<usize>,
    pub context_hash: Option<String>,
    pub contains: Option<String>,
    pub reply: ProviderReply,
}

impl FixtureEntry {
    fn matches(&self, role: &str, context: &[ChatMessage], ord: usize, hash: &str) -> bool {
        self.role == role
            && self.ordinal.is_none_or(|o| o == ord)
            && self.context_hash.as_deref().is_none_or(|h| h == hash)
            && self.contains.as_deref().is_none_or(|needle| {
                context
                    .iter()
                    .rev()
                    .find(|m| m.role == MessageRole::User)
                    .is_some_and(|m| m.content.contains(needle))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedProvider {
    entries: Vec<FixtureEntry>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        Self { entries }
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let raw: RawFixture = serde_json::from_str(text).map_err(|e| FixtureError(e.to_string()))?;
        if raw.schema != FIXTURE_SCHEMA {
            return Err(FixtureError(format!("unsupported schema '{}', expected '{FIXTURE_SCHEMA}'", raw.schema)));
        }
        let entries = raw
            .entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let reply = parse_reply(e.reply).map_err(|m| FixtureError(format!("entry {i}: {m}")))?;
                Ok(FixtureEntry {
                    role: e.role,
                    ordinal: e.ordinal,
                    context_hash: e.context_hash,
                    contains: e.contains,
                    reply,
                })
            })
            .collect::<Result<_, FixtureError>>()?;
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FixtureEntry] {
        &self.entries
    }
}

fn parse_reply(reply: Map<String, Value>) -> Result<ProviderReply, String> {
    if reply.len() != 1 {
        return Err("reply must have exactly one of text, tool_call, candidates, plan".into());
    }
    let (kind, body) = reply.into_iter().next().expect("one entry");
    match kind.as_str() {
        "text" => match body {
            Value::String(s) => Ok(ProviderReply::Text(s)),
            _ => Err("text reply must be a string".into()),
        },
        "tool_call" => {
            let tool = body
                .get("tool")
                .and_then(Value::as_str)
                .ok_or("tool_call needs a string 'tool'")?
                .to_string();
            let args = match body.get("args") {
                None => Map::new(),
                Some(Value::Object(a)) => a.clone(),
                Some(_) => return Err("tool_call args must be an object".into()),
            };
            Ok(ProviderReply::ToolCall { tool, args })
        }
        "candidates" => {
            let drafts: Vec<CandidateDraft> = serde_json::from_value(body).map_err(|e| format!("candidates: {e}"))?;
            Ok(ProviderReply::Candidates(drafts))
        }
        "plan" => {
            if !body.is_array() {
                return Err("plan reply must be an array of steps".into());
            }
            Ok(ProviderReply::Text(json!({ "steps": body }).to_string()))
        }
        other => Err(format!("unknown reply kind '{other}'")),
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        let ord = ordinal(context);
        let hash = context_hash(context);
        self.entries
            .iter()
            .find(|e| e.matches(role, context, ord, &hash))
            .map(|e| e.reply.clone())
            .ok_or(ProviderError::NoMatch {
                role: role.to_string(),
                ordinal: ord,
                context_hash: hash,
            })
    }
}

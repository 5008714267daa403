//! A minimal MCP-style tool protocol: JSON-RPC 2.0 messages, one per line.
//!
//! Implemented methods: `initialize`, `tools/list`, `tools/call`,
//! `resources/read`. Everything else answers `-32601`. The wire format is
//! documented in `docs/protocol.md`.

pub mod client;
pub mod message;
pub mod server;
pub mod transport;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use client::{Client, ClientError};
pub use message::{decode_message, encode_message, DecodeError, Message, RequestId, RpcError};
pub use server::{Server, ToolRegistry};
pub use transport::Transport;

pub const PROTOCOL_VERSION: &str = "0.1";

/// Error codes. Standard JSON-RPC codes plus application codes in
/// `-32000..=-32099`, each with a stable symbolic name.
pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const INTERNAL_ERROR: i64 = -32603;

    pub const UNKNOWN_TOOL: i64 = -32001;
    pub const UNKNOWN_RESOURCE: i64 = -32002;
    pub const TOOL_FAILED: i64 = -32003;
    pub const RESOURCE_FAILED: i64 = -32004;
    pub const NOT_INITIALIZED: i64 = -32005;
    pub const ALREADY_INITIALIZED: i64 = -32006;
    pub const VERSION_MISMATCH: i64 = -32007;

    pub fn symbol(code: i64) -> &'static str {
        match code {
            PARSE_ERROR => "parse_error",
            INVALID_REQUEST => "invalid_request",
            METHOD_NOT_FOUND => "method_not_found",
            INVALID_PARAMS => "invalid_params",
            INTERNAL_ERROR => "internal_error",
            UNKNOWN_TOOL => "unknown_tool",
            UNKNOWN_RESOURCE => "unknown_resource",
            TOOL_FAILED => "tool_failed",
            RESOURCE_FAILED => "resource_failed",
            NOT_INITIALIZED => "not_initialized",
            ALREADY_INITIALIZED => "already_initialized",
            VERSION_MISMATCH => "version_mismatch",
            _ => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub name: String,
    /// Protocol version the server speaks.
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Number,
    Integer,
    Boolean,
    Object,
    Array,
}

impl ParamType {
    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamType::String => v.is_string(),
            ParamType::Number => v.is_number(),
            ParamType::Integer => v.is_i64() || v.is_u64(),
            ParamType::Boolean => v.is_boolean(),
            ParamType::Object => v.is_object(),
            ParamType::Array => v.is_array(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub ty: ParamType,
    pub description: String,
    pub required: bool,
}

impl ParamSpec {
    pub fn required(ty: ParamType, description: impl Into<String>) -> Self {
        Self {
            ty,
            description: description.into(),
            required: true,
        }
    }

    pub fn optional(ty: ParamType, description: impl Into<String>) -> Self {
        Self {
            ty,
            description: description.into(),
            required: false,
        }
    }
}

/// LLM-facing tool metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub input_schema: BTreeMap<String, ParamSpec>,
}

impl ToolDescriptor {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            input_schema: BTreeMap::new(),
        }
    }

    pub fn param(mut self, name: impl Into<String>, spec: ParamSpec) -> Self {
        self.input_schema.insert(name.into(), spec);
        self
    }

    /// Wire form: `{"name", "description", "inputSchema": {JSON Schema}}`.
    pub fn to_json(&self) -> Value {
        let properties: Map<String, Value> = self
            .input_schema
            .iter()
            .map(|(k, s)| (k.clone(), json!({"type": s.ty, "description": s.description})))
            .collect();
        let required: Vec<&String> = self
            .input_schema
            .iter()
            .filter(|(_, s)| s.required)
            .map(|(k, _)| k)
            .collect();
        json!({
            "name": self.name,
            "description": self.description,
            "inputSchema": {"type": "object", "properties": properties, "required": required},
        })
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        let name = v.get("name")?.as_str()?.to_string();
        let description = v.get("description")?.as_str()?.to_string();
        let schema = v.get("inputSchema")?;
        let required: Vec<&str> = schema
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let mut input_schema = BTreeMap::new();
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (k, p) in props {
                let ty: ParamType = serde_json::from_value(p.get("type")?.clone()).ok()?;
                let description = p.get("description").and_then(Value::as_str).unwrap_or_default();
                input_schema.insert(
                    k.clone(),
                    ParamSpec {
                        ty,
                        description: description.to_string(),
                        required: required.contains(&k.as_str()),
                    },
                );
            }
        }
        Some(Self {
            name,
            description,
            input_schema,
        })
    }

    /// Checks call arguments against the input schema.
    pub fn validate_args(&self, args: &Map<String, Value>) -> Result<(), String> {
        for (k, spec) in &self.input_schema {
            match args.get(k) {
                None if spec.required => return Err(format!("missing required argument '{k}'")),
                Some(v) if !spec.ty.accepts(v) => {
                    return Err(format!("argument '{k}' must be of type {:?}", spec.ty).to_lowercase())
                }
                _ => {}
            }
        }
        if let Some(extra) = args.keys().find(|k| !self.input_schema.contains_key(*k)) {
            return Err(format!("unknown argument '{extra}'"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceDescriptor {
    pub uri: String,
    pub description: String,
}

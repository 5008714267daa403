use serde_json::{Map, Value};

use super::codes;

pub type RequestId = i64;
pub type Params = Map<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            data: None,
        }
    }

    /// Application error carrying its symbolic name in `data.kind`.
    pub fn app(code: i64, message: impl Into<String>) -> Self {
        let mut data = Map::new();
        data.insert("kind".into(), Value::String(codes::symbol(code).to_string()));
        Self {
            code,
            message: message.into(),
            data: Some(Value::Object(data)),
        }
    }

    pub fn kind(&self) -> &'static str {
        codes::symbol(self.code)
    }
}

impl std::fmt::Display for RpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.kind(), self.message)
    }
}

impl std::error::Error for RpcError {}

/// A JSON-RPC 2.0 message.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request {
        id: RequestId,
        method: String,
        params: Params,
    },
    Notification {
        method: String,
        params: Params,
    },
    Response {
        id: RequestId,
        result: Value,
    },
    Error {
        id: Option<RequestId>,
        error: RpcError,
    },
}

/// A line that could not be decoded, with the error response it warrants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct DecodeError {
    pub id: Option<RequestId>,
    pub error: RpcError,
}

impl Message {
    pub fn request(id: RequestId, method: impl Into<String>, params: Params) -> Self {
        Message::Request {
            id,
            method: method.into(),
            params,
        }
    }

    pub fn id(&self) -> Option<RequestId> {
        match self {
            Message::Request { id, .. } | Message::Response { id, .. } => Some(*id),
            Message::Error { id, .. } => *id,
            Message::Notification { .. } => None,
        }
    }

    fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("jsonrpc".into(), Value::String("2.0".into()));
        match self {
            Message::Request { id, method, params } => {
                obj.insert("id".into(), Value::from(*id));
                obj.insert("method".into(), Value::String(method.clone()));
                obj.insert("params".into(), Value::Object(params.clone()));
            }
            Message::Notification { method, params } => {
                obj.insert("method".into(), Value::String(method.clone()));
                obj.insert("params".into(), Value::Object(params.clone()));
            }
            Message::Response { id, result } => {
                obj.insert("id".into(), Value::from(*id));
                obj.insert("result".into(), result.clone());
            }
            Message::Error { id, error } => {
                obj.insert("id".into(), id.map_or(Value::Null, Value::from));
                let mut e = Map::new();
                e.insert("code".into(), Value::from(error.code));
                e.insert("message".into(), Value::String(error.message.clone()));
                if let Some(data) = &error.data {
                    e.insert("data".into(), data.clone());
                }
                obj.insert("error".into(), Value::Object(e));
            }
        }
        Value::Object(obj)
    }
}

/// Serializes a message as one line of compact JSON (no trailing newline).
/// Object keys are emitted in sorted order, so equal messages encode to equal
/// bytes.
pub fn encode_message(msg: &Message) -> String {
    // serde_json escapes control characters, so the output has no raw newline.
    serde_json::to_string(&msg.to_value()).expect("JSON values always serialize")
}

fn invalid(id: Option<RequestId>, message: impl Into<String>) -> DecodeError {
    DecodeError {
        id,
        error: RpcError::new(codes::INVALID_REQUEST, message),
    }
}

pub fn decode_message(line: &str) -> Result<Message, DecodeError> {
    let value: Value = serde_json::from_str(line).map_err(|e| DecodeError {
        id: None,
        error: RpcError::new(codes::PARSE_ERROR, format!("parse error: {e}")),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(invalid(None, "message must be a JSON object"));
    };
    let id = match obj.get("id") {
        None => None,
        Some(Value::Null) => None,
        Some(v) => match v.as_i64() {
            Some(id) => Some(id),
            None => return Err(invalid(None, "id must be an integer")),
        },
    };
    if obj.get("jsonrpc") != Some(&Value::String("2.0".into())) {
        return Err(invalid(id, "missing or unsupported jsonrpc version"));
    }
    if let Some(method) = obj.remove("method") {
        let Value::String(method) = method else {
            return Err(invalid(id, "method must be a string"));
        };
        let params = match obj.remove("params") {
            None => Map::new(),
            Some(Value::Object(p)) => p,
            Some(_) => return Err(invalid(id, "params must be an object")),
        };
        return Ok(match (obj.contains_key("id"), id) {
            (true, Some(id)) => Message::Request { id, method, params },
            (true, None) => return Err(invalid(None, "request id must not be null")),
            (false, _) => Message::Notification { method, params },
        });
    }
    match (obj.remove("result"), obj.remove("error")) {
        (Some(_), Some(_)) => Err(invalid(id, "message has both result and error")),
        (Some(result), None) => match id {
            Some(id) => Ok(Message::Response { id, result }),
            None => Err(invalid(None, "response is missing its id")),
        },
        (None, Some(Value::Object(mut e))) => {
            let code = e.get("code").and_then(Value::as_i64);
            let message = e.remove("message");
            match (code, message) {
                (Some(code), Some(Value::String(message))) => Ok(Message::Error {
                    id,
                    error: RpcError {
                        code,
                        message,
                        data: e.remove("data"),
                    },
                }),
                _ => Err(invalid(id, "error object needs integer code and string message")),
            }
        }
        (None, Some(_)) => Err(invalid(id, "error must be an object")),
        (None, None) => Err(invalid(id, "missing method, result or error")),
    }
}

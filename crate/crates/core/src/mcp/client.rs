use std::io;

use serde_json::{json, Map, Value};

use super::message::{decode_message, encode_message, Message, RequestId, RpcError};
use super::transport::Transport;
use super::{ServerInfo, ToolDescriptor, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Io(#[from] io::Error),
    #[error("transport closed")]
    Closed,
    #[error("client is not initialized")]
    NotInitialized,
    #[error("already initialized")]
    AlreadyInitialized,
    #[error("protocol version mismatch: client speaks {expected}, server answered {got}")]
    VersionMismatch { expected: String, got: String },
    #[error("server error {0}")]
    Rpc(RpcError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl ClientError {
    /// True when the connection itself failed, as opposed to the server
    /// answering a request with an error.
    pub fn is_transport(&self) -> bool {
        matches!(self, ClientError::Io(_) | ClientError::Closed | ClientError::Protocol(_))
    }
}

/// One request in flight at a time; each call blocks for its response.
pub struct Client<T> {
    transport: T,
    next_id: RequestId,
    server: Option<ServerInfo>,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Self {
            transport,
            next_id: 1,
            server: None,
        }
    }

    pub fn server_info(&self) -> Option<&ServerInfo> {
        self.server.as_ref()
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn request(&mut self, method: &str, params: Map<String, Value>) -> Result<Value, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let line = encode_message(&Message::request(id, method, params));
        self.transport.send_line(&line).map_err(closed_or_io)?;
        loop {
            let line = self.transport.recv_line()?.ok_or(ClientError::Closed)?;
            let msg = decode_message(&line).map_err(|e| ClientError::Protocol(format!("undecodable reply: {e}")))?;
            match msg {
                Message::Notification { .. } => continue,
                Message::Response { id: rid, result } if rid == id => return Ok(result),
                Message::Error { id: Some(rid), error } if rid == id => return Err(ClientError::Rpc(error)),
                Message::Error { id: None, error } => return Err(ClientError::Rpc(error)),
                other => {
                    return Err(ClientError::Protocol(format!(
                        "expected reply to request {id}, got {}",
                        encode_message(&other)
                    )))
                }
            }
        }
    }

    fn notify(&mut self, method: &str) -> Result<(), ClientError> {
        let line = encode_message(&Message::Notification {
            method: method.into(),
            params: Map::new(),
        });
        self.transport.send_line(&line).map_err(closed_or_io)
    }

    fn ready(&self) -> Result<(), ClientError> {
        if self.server.is_some() {
            Ok(())
        } else {
            Err(ClientError::NotInitialized)
        }
    }

    pub fn initialize(&mut self) -> Result<ServerInfo, ClientError> {
        if self.server.is_some() {
            return Err(ClientError::AlreadyInitialized);
        }
        let params = json!({
            "protocolVersion": PROTOCOL_VERSION,
            "clientInfo": {"name": "dccflow-client", "version": env!("CARGO_PKG_VERSION")},
        });
        let result = self.request("initialize", into_map(params))?;
        let got = result
            .get("protocolVersion")
            .and_then(Value::as_str)
            .ok_or_else(|| ClientError::Protocol("initialize result lacks protocolVersion".into()))?;
        if got != PROTOCOL_VERSION {
            return Err(ClientError::VersionMismatch {
                expected: PROTOCOL_VERSION.into(),
                got: got.into(),
            });
        }
        let info: ServerInfo = result
            .get("serverInfo")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| ClientError::Protocol("initialize result lacks serverInfo".into()))?;
        self.notify("notifications/initialized")?;
        self.server = Some(info.clone());
        Ok(info)
    }

    pub fn list_tools(&mut self) -> Result<Vec<ToolDescriptor>, ClientError> {
        self.ready()?;
        let result = self.request("tools/list", Map::new())?;
        result
            .get("tools")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::Protocol("tools/list result lacks 'tools'".into()))?
            .iter()
            .map(|t| ToolDescriptor::from_json(t).ok_or_else(|| ClientError::Protocol(format!("bad tool descriptor {t}"))))
            .collect()
    }

    /// Calls a tool and returns the concatenated text content.
    pub fn call_tool(&mut self, name: &str, args: Map<String, Value>) -> Result<String, ClientError> {
        self.ready()?;
        let result = self.request("tools/call", into_map(json!({"name": name, "arguments": args})))?;
        let content = result
            .get("content")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::Protocol("tools/call result lacks 'content'".into()))?;
        Ok(content
            .iter()
            .filter_map(|c| c.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("\n"))
    }

    pub fn read_resource(&mut self, uri: &str) -> Result<Value, ClientError> {
        self.ready()?;
        let result = self.request("resources/read", into_map(json!({ "uri": uri })))?;
        let text = result
            .get("contents")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("text"))
            .and_then(Value::as_str)
            .ok_or_else(|| ClientError::Protocol("resources/read result lacks contents[0].text".into()))?;
        serde_json::from_str(text).map_err(|e| ClientError::Protocol(format!("resource body is not JSON: {e}")))
    }

    /// Sends an arbitrary request, for probing error paths.
    pub fn raw_request(&mut self, method: &str, params: Map<String, Value>) -> Result<Value, ClientError> {
        self.request(method, params)
    }
}

fn closed_or_io(e: io::Error) -> ClientError {
    if e.kind() == io::ErrorKind::BrokenPipe {
        ClientError::Closed
    } else {
        ClientError::Io(e)
    }
}

pub(crate) fn into_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

use std::collections::BTreeMap;
use std::io;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Map, Value};

use super::message::{decode_message, encode_message, Message, Params, RpcError};
use super::transport::{self, Transport};
use super::{codes, ResourceDescriptor, ServerInfo, ToolDescriptor, PROTOCOL_VERSION};

pub type ToolHandler = Box<dyn Fn(&Map<String, Value>) -> Result<String, String> + Send + Sync>;
pub type ResourceHandler = Box<dyn Fn() -> Result<Value, String> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool '{0}' is already registered")]
    DuplicateTool(String),
    #[error("resource '{0}' is already registered")]
    DuplicateResource(String),
    #[error("'{0}' needs a non-empty description")]
    EmptyDescription(String),
}

/// Tools and resources a server exposes. Handed to [`Server::new`] by value,
/// after which it can no longer change.
#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, (ToolDescriptor, ToolHandler)>,
    resources: BTreeMap<String, (ResourceDescriptor, ResourceHandler)>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tool(
        &mut self,
        descriptor: ToolDescriptor,
        handler: impl Fn(&Map<String, Value>) -> Result<String, String> + Send + Sync + 'static,
    ) -> Result<&mut Self, RegistryError> {
        if descriptor.description.trim().is_empty() {
            return Err(RegistryError::EmptyDescription(descriptor.name));
        }
        if self.tools.contains_key(&descriptor.name) {
            return Err(RegistryError::DuplicateTool(descriptor.name));
        }
        self.tools.insert(descriptor.name.clone(), (descriptor, Box::new(handler)));
        Ok(self)
    }

    pub fn resource(
        &mut self,
        descriptor: ResourceDescriptor,
        handler: impl Fn() -> Result<Value, String> + Send + Sync + 'static,
    ) -> Result<&mut Self, RegistryError> {
        if descriptor.description.trim().is_empty() {
            return Err(RegistryError::EmptyDescription(descriptor.uri));
        }
        if self.resources.contains_key(&descriptor.uri) {
            return Err(RegistryError::DuplicateResource(descriptor.uri));
        }
        self.resources.insert(descriptor.uri.clone(), (descriptor, Box::new(handler)));
        Ok(self)
    }

    pub fn tool_descriptors(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.tools.values().map(|(d, _)| d)
    }
}

/// Per-connection protocol state.
#[derive(Debug, Default)]
pub struct Connection {
    initialized: bool,
}

pub struct Server {
    info: ServerInfo,
    registry: ToolRegistry,
}

impl Server {
    pub fn new(name: impl Into<String>, registry: ToolRegistry) -> Self {
        Self {
            info: ServerInfo {
                name: name.into(),
                version: PROTOCOL_VERSION.to_string(),
            },
            registry,
        }
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }

    /// Serves one connection until the peer closes it. Requests are handled
    /// strictly in arrival order; notifications get no reply.
    pub fn serve<T: Transport + ?Sized>(&self, transport: &mut T) -> io::Result<()> {
        let mut conn = Connection::default();
        while let Some(line) = transport.recv_line()? {
            if let Some(reply) = self.handle_line(&mut conn, &line) {
                transport.send_line(&reply)?;
            }
        }
        Ok(())
    }

    /// Processes one incoming line, returning the encoded reply if one is due.
    pub fn handle_line(&self, conn: &mut Connection, line: &str) -> Option<String> {
        let reply = match decode_message(line) {
            Err(e) => Message::Error { id: e.id, error: e.error },
            Ok(Message::Request { id, method, params }) => match self.dispatch(conn, &method, &params) {
                Ok(result) => Message::Response { id, result },
                Err(error) => Message::Error { id: Some(id), error },
            },
            // Notifications and stray responses are ignored.
            Ok(_) => return None,
        };
        Some(encode_message(&reply))
    }

    fn dispatch(&self, conn: &mut Connection, method: &str, params: &Params) -> Result<Value, RpcError> {
        let needs_init = matches!(method, "tools/list" | "tools/call" | "resources/read");
        if needs_init && !conn.initialized {
            return Err(RpcError::app(codes::NOT_INITIALIZED, "initialize must be called first"));
        }
        match method {
            "initialize" => {
                if conn.initialized {
                    return Err(RpcError::app(codes::ALREADY_INITIALIZED, "connection is already initialized"));
                }
                let requested = params.get("protocolVersion").and_then(Value::as_str);
                if requested != Some(PROTOCOL_VERSION) {
                    let mut e = RpcError::app(
                        codes::VERSION_MISMATCH,
                        match requested {
                            Some(v) => format!("unsupported protocol version '{v}'; server speaks {PROTOCOL_VERSION}"),
                            None => format!("protocolVersion is required; server speaks {PROTOCOL_VERSION}"),
                        },
                    );
                    if let Some(Value::Object(data)) = &mut e.data {
                        data.insert("supported".into(), Value::String(PROTOCOL_VERSION.into()));
                    }
                    return Err(e);
                }
                conn.initialized = true;
                Ok(json!({
                    "protocolVersion": PROTOCOL_VERSION,
                    "serverInfo": {"name": self.info.name, "version": self.info.version},
                    "capabilities": {"tools": {}, "resources": {}},
                }))
            }
            "tools/list" => {
                let tools: Vec<Value> = self.registry.tool_descriptors().map(ToolDescriptor::to_json).collect();
                Ok(json!({ "tools": tools }))
            }
            "tools/call" => {
                let name = params
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| RpcError::new(codes::INVALID_PARAMS, "tools/call needs a string 'name'"))?;
                let args = match params.get("arguments") {
                    None => Map::new(),
                    Some(Value::Object(a)) => a.clone(),
                    Some(_) => return Err(RpcError::new(codes::INVALID_PARAMS, "'arguments' must be an object")),
                };
                let (descriptor, handler) = self
                    .registry
                    .tools
                    .get(name)
                    .ok_or_else(|| RpcError::app(codes::UNKNOWN_TOOL, format!("unknown tool '{name}'")))?;
                descriptor
                    .validate_args(&args)
                    .map_err(|m| RpcError::new(codes::INVALID_PARAMS, m))?;
                let text = guarded(|| handler(&args))
                    .map_err(|m| RpcError::app(codes::TOOL_FAILED, m))?;
                Ok(json!({"content": [{"type": "text", "text": text}]}))
            }
            "resources/read" => {
                let uri = params
                    .get("uri")
                    .and_then(Value::as_str)
                    .ok_or_else(|| RpcError::new(codes::INVALID_PARAMS, "resources/read needs a string 'uri'"))?;
                let (_, handler) = self
                    .registry
                    .resources
                    .get(uri)
                    .ok_or_else(|| RpcError::app(codes::UNKNOWN_RESOURCE, format!("unknown resource '{uri}'")))?;
                let value = guarded(handler).map_err(|m| RpcError::app(codes::RESOURCE_FAILED, m))?;
                let text = serde_json::to_string(&value).expect("JSON values always serialize");
                Ok(json!({"contents": [{"uri": uri, "mimeType": "application/json", "text": text}]}))
            }
            other => Err(RpcError::new(codes::METHOD_NOT_FOUND, format!("method '{other}' not found"))),
        }
    }
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(format!("handler panicked: {msg}"))
    })
}

/// Accepts TCP connections forever, serving each on its own thread with a
/// fresh server from `make_server` (so per-connection state stays isolated).
pub fn serve_tcp<F>(listener: TcpListener, make_server: F) -> io::Result<()>
where
    F: Fn() -> Server + Send + Sync + 'static,
{
    let make_server = Arc::new(make_server);
    for stream in listener.incoming() {
        let stream = stream?;
        let make_server = Arc::clone(&make_server);
        thread::spawn(move || {
            let server = make_server();
            if let Ok(mut t) = transport::tcp(stream) {
                let _ = server.serve(&mut t);
            }
        });
    }
    Ok(())
}

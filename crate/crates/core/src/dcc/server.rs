//! The simulator's MCP surface: a console tool, two read-only tools and the
//! shortcut-key resource.

use std::io;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Map, Value};

use super::command::parse_script;
use super::scene::Scene;
use super::snapshot::{render_summary, snapshot};
use crate::mcp::client::Client;
use crate::mcp::server::{Server, ToolRegistry};
use crate::mcp::transport::{pipe, PipeTransport, Transport};
use crate::mcp::{ParamSpec, ParamType, ResourceDescriptor, ToolDescriptor};

pub const SERVER_NAME: &str = "3Dify-MCP-Server";
pub const CONSOLE_TOOL: &str = "run_cmd_on_default_console";
pub const SNAPSHOT_TOOL: &str = "get_scene_snapshot";
pub const SUMMARY_TOOL: &str = "render_summary";
pub const SHORTCUT_RESOURCE: &str = "shortcut://keys";

/// Simulator keybindings reported through `shortcut://keys`.
pub fn shortcut_keys() -> Value {
    json!({
        "delete": "X",
        "duplicate": "Shift+D",
        "grab": "G",
        "rotate": "R",
        "scale": "S",
        "undo": "Ctrl+Z",
        "redo": "Ctrl+Shift+Z",
        "toggle_edit_mode": "Tab",
    })
}

/// Runs a console script against the scene as one transaction and returns
/// the per-command result lines.
pub fn run_console(scene: &mut Scene, script: &str) -> Result<String, String> {
    let cmds = parse_script(script).map_err(|(line, d)| format!("line {line}, {d}"))?;
    if cmds.is_empty() {
        return Err("no commands given".into());
    }
    let results = scene
        .apply_all(&cmds)
        .map_err(|(i, e)| if cmds.len() == 1 { e.to_string() } else { format!("command {}: {e}", i + 1) })?;
    Ok(results.join("\n"))
}

pub fn dcc_registry(scene: Arc<Mutex<Scene>>) -> ToolRegistry {
    let mut reg = ToolRegistry::new();
    let console_scene = Arc::clone(&scene);
    let snapshot_scene = Arc::clone(&scene);
    reg.tool(
        ToolDescriptor::new(
            CONSOLE_TOOL,
            "Execute command on DCC's default console. Accepts one or more lines of the console \
             language (add, set, link, delete, query, snapshot, render_summary); all lines apply \
             atomically.",
        )
        .param("cmd", ParamSpec::required(ParamType::String, "Console command lines")),
        move |args| {
            let cmd = args.get("cmd").and_then(Value::as_str).unwrap_or_default();
            run_console(&mut console_scene.lock().unwrap(), cmd)
        },
    )
    .and_then(|r| {
        r.tool(
            ToolDescriptor::new(SNAPSHOT_TOOL, "Return the canonical scene/1 JSON snapshot of the current scene."),
            move |_| Ok(snapshot(&snapshot_scene.lock().unwrap())),
        )
    })
    .and_then(|r| {
        r.tool(
            ToolDescriptor::new(SUMMARY_TOOL, "Return a text summary of every object, its transform and links."),
            move |_| Ok(render_summary(&scene.lock().unwrap())),
        )
    })
    .and_then(|r| {
        r.resource(
            ResourceDescriptor {
                uri: SHORTCUT_RESOURCE.into(),
                description: "Get activated shortcut key list".into(),
            },
            || Ok(shortcut_keys()),
        )
    })
    .expect("static registry is valid");
    reg
}

/// A server over a fresh, empty scene.
pub fn dcc_server() -> (Server, Arc<Mutex<Scene>>) {
    let scene = Arc::new(Mutex::new(Scene::new()));
    (Server::new(SERVER_NAME, dcc_registry(Arc::clone(&scene))), scene)
}

/// Serves a fresh scene over `transport` until the peer disconnects.
pub fn serve_dcc_mcp<T: Transport + ?Sized>(transport: &mut T) -> io::Result<()> {
    dcc_server().0.serve(transport)
}

/// Starts an in-process simulator on a background thread and returns an
/// uninitialized client connected to it. The server thread exits when the
/// client is dropped.
pub fn spawn_embedded() -> (Client<PipeTransport>, Arc<Mutex<Scene>>) {
    let (client_end, mut server_end) = pipe();
    let (server, scene) = dcc_server();
    thread::spawn(move || {
        let _ = server.serve(&mut server_end);
    });
    (Client::new(client_end), scene)
}

pub fn console_args(cmd: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("cmd".into(), Value::String(cmd.into()));
    m
}

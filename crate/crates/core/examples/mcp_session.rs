//! Serves the DCC simulator over TCP and talks to it with the protocol
//! client, recording every line on the wire.
//!
//! cargo run -p dccflow --example mcp_session

use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use dccflow::dcc::server::{console_args, dcc_server};
use dccflow::mcp::server::serve_tcp;
use dccflow::mcp::transport::{tcp_connect, Recording};
use dccflow::mcp::{Client, ClientError};
use serde_json::Map;

fn main() -> Result<(), ClientError> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    std::thread::spawn(move || serve_tcp(listener, || dcc_server().0));

    let log = Arc::new(Mutex::new(Vec::new()));
    let mut client = Client::new(Recording::with_log(tcp_connect(&addr)?, Arc::clone(&log)));
    let info = client.initialize()?;
    println!("connected to {} {} at {addr}", info.name, info.version);

    for tool in client.list_tools()? {
        println!("tool {}: {}", tool.name, tool.description);
    }
    println!("keys: {}", client.read_resource("shortcut://keys")?);

    let out = client.call_tool("run_cmd_on_default_console", console_args("add cylinder post radius=0.1 height=2"))?;
    println!("console: {out}");
    match client.call_tool("run_cmd_on_default_console", console_args("add cube post")) {
        Err(ClientError::Rpc(e)) => println!("error {} ({}): {}", e.code, dccflow::mcp::codes::symbol(e.code), e.message),
        other => println!("unexpected: {other:?}"),
    }
    print!("{}", client.call_tool("get_scene_snapshot", Map::new())?);

    println!("\nwire transcript:");
    for line in log.lock().unwrap().iter() {
        println!("{line}");
    }
    Ok(())
}

//! Protocol conformance: a golden client/simulator transcript and decode
//! fuzzing.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::thread;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};

use dccflow::dcc::server::{console_args, dcc_server, CONSOLE_TOOL, SHORTCUT_RESOURCE, SNAPSHOT_TOOL, SUMMARY_TOOL};
use dccflow::mcp::server::Connection;
use dccflow::mcp::transport::{pipe, Recording};
use dccflow::mcp::{decode_message, encode_message, Client, Message};

use super::{ensure, Outcome};

/// Resolves from either workspace crate that includes these modules.
pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/mcp-conformance.txt")
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Runs the fixed conformance script and returns the transcript text.
pub fn transcript() -> String {
    let (server, _scene) = dcc_server();
    let (client_end, mut server_end) = pipe();
    let handle = thread::spawn(move || server.serve(&mut server_end));
    let (recorded, log) = Recording::new(client_end);
    let mut c = Client::new(recorded);

    // Outcomes are recorded by the transcript itself; errors are expected
    // on the error-path requests.
    c.initialize().unwrap();
    c.list_tools().unwrap();
    c.read_resource(SHORTCUT_RESOURCE).unwrap();
    let console = |c: &mut Client<_>, cmd: String| {
        let _ = c.call_tool(CONSOLE_TOOL, console_args(&cmd));
    };
    console(&mut c, "add plane floor width=12 depth=12".into());
    for i in 0..24 {
        console(&mut c, format!("add cube part{i} width={} height={} x={i}", 1 + i % 3, 0.5 + (i % 4) as f64));
    }
    for i in 1..24 {
        console(&mut c, format!("link part{i}.z = part{}.z + part{}.height", i - 1, i - 1));
    }
    console(&mut c, "set part0.height 2.5".into());
    console(&mut c, "query part5".into());
    console(&mut c, "query part23".into());
    console(&mut c, "add light lamp power=250 z=10\nset lamp.emit_color \"#ffcc88\"".into());
    console(&mut c, "add cylinder leg radius=0.1\nlink leg.height = part2.height * 2 - 0.5".into());
    // Error paths at the tool level.
    console(&mut c, "add cube part0".into());
    console(&mut c, "link part0.z = part23.z".into());
    console(&mut c, "set part3.z 1".into());
    console(&mut c, "add sphere ball".into());
    console(&mut c, "".into());
    console(&mut c, "delete part0".into());
    console(&mut c, "query nope".into());
    console(&mut c, "set part1.sx 0".into());
    console(&mut c, "link part1.width = floor.nothing".into());
    console(&mut c, "add cube ok1\nadd cube ok1".into());
    let _ = c.call_tool(SNAPSHOT_TOOL, Map::new());
    let _ = c.call_tool(SUMMARY_TOOL, Map::new());
    console(&mut c, "snapshot".into());
    for i in (12..24).rev() {
        console(&mut c, format!("delete part{i}"));
    }
    console(&mut c, "render_summary".into());
    // Error paths at the protocol level.
    let _ = c.call_tool("explode", Map::new());
    let _ = c.call_tool(CONSOLE_TOOL, Map::new());
    let _ = c.call_tool(CONSOLE_TOOL, obj(json!({"cmd": 7})));
    let _ = c.raw_request("tools/call", obj(json!({"name": CONSOLE_TOOL, "arguments": [1]})));
    let _ = c.raw_request("tools/call", Map::new());
    let _ = c.read_resource("shortcut://nothing");
    let _ = c.raw_request("resources/read", Map::new());
    let _ = c.raw_request("scene/teleport", Map::new());
    let _ = c.raw_request("initialize", obj(json!({"protocolVersion": "0.1"})));
    c.read_resource(SHORTCUT_RESOURCE).unwrap();
    c.list_tools().unwrap();
    let _ = c.call_tool(SNAPSHOT_TOOL, Map::new());
    drop(c);
    handle.join().unwrap().unwrap();
    let mut lines: Vec<String> = log.lock().unwrap().clone();

    // Raw lines a well-behaved client never sends, on a fresh connection.
    let (server, _scene) = dcc_server();
    let mut conn = Connection::default();
    let raw = [
        "not json",
        "[]",
        "{}",
        "42",
        r#"{"jsonrpc":"1.0","id":1,"method":"initialize"}"#,
        r#"{"jsonrpc":"2.0","id":"abc","method":"initialize"}"#,
        r#"{"jsonrpc":"2.0","id":null,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":2,"method":7}"#,
        r#"{"jsonrpc":"2.0","id":3,"method":"tools/list","params":[]}"#,
        r#"{"jsonrpc":"2.0","id":4,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":5,"method":"resources/read","params":{"uri":"shortcut://keys"}}"#,
        r#"{"jsonrpc":"2.0","id":6,"method":"initialize","params":{"protocolVersion":"9.9"}}"#,
        r#"{"jsonrpc":"2.0","id":7,"method":"initialize","params":{}}"#,
        r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#,
        r#"{"jsonrpc":"2.0","id":8,"method":"initialize","params":{"protocolVersion":"0.1"}}"#,
        r#"{"jsonrpc":"2.0","id":9,"result":{}}"#,
        r#"{"jsonrpc":"2.0","id":10,"result":{},"error":{"code":1,"message":"x"}}"#,
        r#"{"jsonrpc":"2.0","id":11,"error":"bad"}"#,
        r#"{"jsonrpc":"2.0","id":12}"#,
        r#"{"jsonrpc":"2.0","id":13,"method":"tools/call","params":{"name":"run_cmd_on_default_console","arguments":{"cmd":"add cube a\nlink a.z = a.z + 1"}}}"#,
        r#"{"jsonrpc":"2.0","id":14,"method":"tools/call","params":{"name":"run_cmd_on_default_console","arguments":{"cmd":"add cube a","extra":1}}}"#,
        r#"{"jsonrpc":"2.0","id":15,"method":"tools/call","params":{"name":"get_scene_snapshot"}}"#,
        r#"{"jsonrpc":"2.0","id":9007199254740993,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":1.5,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":-1,"method":"resources/read","params":{"uri":"shortcut://keys"}}"#,
        "{\"jsonrpc\":\"2.0\",\"id\":16,\"method\":\"tools/call\",\"params\":{\"name\":\"run_cmd_on_default_console\",\"arguments\":{\"cmd\":\"add cube \\u00e9t\\u00e9\"}}}",
        r#"{"jsonrpc":"2.0","id":17,"method":"shutdown"}"#,
    ];
    for line in raw {
        lines.push(format!("> {line}"));
        match server.handle_line(&mut conn, line) {
            Some(reply) => lines.push(format!("< {reply}")),
            None => lines.push("< (no reply)".into()),
        }
    }
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// Request lines (sent lines carrying a method and an id, or undecodable).
pub fn request_count(transcript: &str) -> usize {
    transcript
        .lines()
        .filter_map(|l| l.strip_prefix("> "))
        .filter(|l| match decode_message(l) {
            Ok(m) => matches!(m, Message::Request { .. }),
            Err(_) => true,
        })
        .count()
}

pub fn check_transcript() -> Outcome {
    let first = transcript();
    let second = transcript();
    ensure(first == second, || "transcript differs between runs".into())?;
    let path = golden_path();
    if std::env::var_os("DCCFLOW_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, &first).map_err(|e| e.to_string())?;
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if golden != first {
        let line = golden.lines().zip(first.lines()).position(|(a, b)| a != b).unwrap_or(0);
        return Err(format!("transcript differs from golden at line {}", line + 1));
    }
    let requests = request_count(&first);
    ensure(requests >= 100, || format!("only {requests} requests"))?;
    for needle in [
        "\"method\":\"initialize\"",
        "\"method\":\"tools/list\"",
        "\"method\":\"tools/call\"",
        "\"uri\":\"shortcut://keys\"",
        "\"kind\":\"unknown_tool\"",
        "\"kind\":\"tool_failed\"",
        "\"kind\":\"not_initialized\"",
        "\"code\":-32700",
        "\"code\":-32600",
        "\"code\":-32601",
        "\"code\":-32602",
    ] {
        ensure(first.contains(needle), || format!("transcript never shows {needle}"))?;
    }
    Ok(format!("{requests} requests, byte-identical across runs and with the golden transcript"))
}

fn fuzz_line(rng: &mut StdRng, seeds: &[String]) -> String {
    const ALPHABET: &[u8] = b"{}[]\":,0123456789-.eE truefalsnul\\/abcxyz_\n\t";
    match rng.gen_range(0..4) {
        0 => {
            let n = rng.gen_range(0..80);
            (0..n).map(|_| *ALPHABET.choose(rng).unwrap() as char).collect()
        }
        1 => {
            let n = rng.gen_range(0..60);
            let bytes: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        _ => {
            let mut chars: Vec<char> = seeds.choose(rng).unwrap().chars().collect();
            for _ in 0..rng.gen_range(1..=4) {
                let at = rng.gen_range(0..=chars.len());
                match rng.gen_range(0..3) {
                    0 if at < chars.len() => {
                        chars.remove(at);
                    }
                    1 => chars.insert(at, *ALPHABET.choose(rng).unwrap() as char),
                    _ if at < chars.len() => chars[at] = *ALPHABET.choose(rng).unwrap() as char,
                    _ => {}
                }
            }
            chars.into_iter().collect()
        }
    }
}

pub struct FuzzStats {
    pub lines: usize,
    pub decoded: usize,
    pub requests: usize,
}

/// Feeds `count` random lines to the decoder and to a live server
/// connection. Every request must get exactly one decodable reply with its
/// id; nothing else may get a reply unless it failed to decode.
pub fn fuzz(count: usize, seed: u64) -> Result<FuzzStats, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let seeds: Vec<String> = transcript()
        .lines()
        .filter_map(|l| l.strip_prefix("> ").or_else(|| l.strip_prefix("< ")))
        .filter(|l| *l != "(no reply)")
        .map(str::to_string)
        .collect();
    let (server, _scene) = dcc_server();
    let mut conn = Connection::default();
    server.handle_line(
        &mut conn,
        r#"{"jsonrpc":"2.0","id":0,"method":"initialize","params":{"protocolVersion":"0.1"}}"#,
    );
    let mut stats = FuzzStats {
        lines: 0,
        decoded: 0,
        requests: 0,
    };
    for _ in 0..count {
        let line = fuzz_line(&mut rng, &seeds);
        let decoded = catch_unwind(|| decode_message(&line)).map_err(|_| format!("decode panicked on {line:?}"))?;
        let reply = catch_unwind(AssertUnwindSafe(|| server.handle_line(&mut conn, &line)))
            .map_err(|_| format!("server panicked on {line:?}"))?;
        stats.lines += 1;
        match (&decoded, &reply) {
            (Ok(Message::Request { id, .. }), Some(r)) => {
                stats.decoded += 1;
                stats.requests += 1;
                let back = decode_message(r).map_err(|e| format!("undecodable reply {r:?}: {e}"))?;
                ensure(back.id() == Some(*id), || format!("reply id mismatch for {line:?}"))?;
                ensure(matches!(back, Message::Response { .. } | Message::Error { .. }), || format!("bad reply {r}"))?;
            }
            (Ok(Message::Request { .. }), None) => return Err(format!("request got no reply: {line:?}")),
            (Ok(m), None) => {
                stats.decoded += 1;
                ensure(decode_message(&encode_message(m)).as_ref() == Ok(m), || format!("round trip failed: {line:?}"))?;
            }
            (Ok(_), Some(r)) => return Err(format!("non-request {line:?} got reply {r}")),
            (Err(e), Some(r)) => {
                let back = decode_message(r).map_err(|e| format!("undecodable error reply {r:?}: {e}"))?;
                ensure(back.id() == e.id, || format!("error reply id mismatch for {line:?}"))?;
            }
            (Err(_), None) => return Err(format!("undecodable line got no error reply: {line:?}")),
        }
    }
    Ok(stats)
}

pub fn run() -> Outcome {
    let transcript = check_transcript()?;
    let s = fuzz(100_000, 7)?;
    Ok(format!(
        "{transcript}; fuzz: {} lines, {} decoded, {} requests answered, no crash",
        s.lines, s.decoded, s.requests
    ))
}

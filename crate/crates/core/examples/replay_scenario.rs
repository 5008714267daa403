//! Replays a scripted scenario and compares it with its goldens.
//!
//! cargo run -p dccflow --example replay_scenario -- scenarios/pc-demo [out-dir] [--bless]

use std::path::PathBuf;

use dccflow::scenario::replay;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let bless = args.iter().any(|a| a == "--bless");
    let mut paths = args.iter().filter(|a| !a.starts_with("--")).map(PathBuf::from);
    let dir = paths.next().unwrap_or_else(|| PathBuf::from("scenarios/pc-demo"));
    let out = paths.next().unwrap_or_else(|| std::env::temp_dir().join("dccflow-replay"));
    let outcome = match replay(&dir, &out, bless) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    for e in &outcome.session.events {
        println!("{}", serde_json::to_string(e).unwrap());
    }
    println!("artifacts in {}", out.display());
    for m in &outcome.mismatches {
        println!("MISMATCH {}: {}", m.path, m.reason);
    }
    println!("{} goldens checked, {} mismatches", outcome.goldens_checked, outcome.mismatches.len());
}

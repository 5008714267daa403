//! Drives the main workflow template turn by turn. Agent replies are canned,
//! the build tool runs against a real simulator scene, and the inspector
//! rejects the first build.
//!
//! cargo run -p dccflow --example chatflow_stages

use std::collections::BTreeMap;

use dccflow::chatflow::{load_template, run_turn, TurnServices};
use dccflow::dcc::server::run_console;
use dccflow::dcc::Scene;

struct Desk {
    scene: Scene,
    inspections: usize,
}

impl TurnServices for Desk {
    fn retrieve(&mut self, query: &str, k: usize) -> Result<Vec<String>, String> {
        Ok(vec![format!("(top {k} passages for '{query}')")])
    }

    fn agent(&mut self, role: &str, _prompt: &str) -> Result<String, String> {
        Ok(match role {
            "scene_analyzer" => "A small desk: one top, four legs.".into(),
            "planner" => "Top at leg height, legs at the corners.".into(),
            "builder" => "add cube top width=1.2 depth=0.6 height=0.04\n\
                          add cube leg width=0.05 depth=0.05 height=0.72\n\
                          link top.z = leg.height"
                .into(),
            "inspector" => {
                self.inspections += 1;
                if self.inspections == 1 { "fail: only one leg" } else { "pass" }.into()
            }
            other => format!("{other}: nothing to add"),
        })
    }

    fn tool(&mut self, _tool: &str, args: &BTreeMap<String, String>) -> Result<String, String> {
        let mut next = Scene::new();
        let out = run_console(&mut next, &args["cmd"])?;
        self.scene = next;
        Ok(out)
    }
}

fn main() {
    let wf = load_template("3dify-main").expect("shipped template");
    let mut state = wf.initial_state();
    let mut desk = Desk {
        scene: Scene::new(),
        inspections: 0,
    };
    for turn in 1..=12 {
        match run_turn(&wf, &state, "a small desk", &mut desk) {
            Ok(r) => {
                println!("turn {turn} [{}] {}", r.new_state.stage, r.output_text.replace('\n', " | "));
                state = r.new_state;
            }
            Err(e) if e.is_session_complete() => {
                println!("turn {turn}: session complete");
                break;
            }
            Err(e) => {
                eprintln!("turn {turn}: {e}");
                std::process::exit(1);
            }
        }
    }
    print!("{}", dccflow::dcc::render_summary(&desk.scene));
}

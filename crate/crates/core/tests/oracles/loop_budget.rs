//! Builder/Inspector loop on the shipped main template with a scripted
//! inspector.

use std::collections::BTreeMap;

use dccflow::chatflow::{load_template, run_turn, TurnServices, Value};

use super::{ensure, Outcome};

pub struct Scripted<F: FnMut() -> bool> {
    /// Returns the next inspection verdict.
    pub inspector: F,
    pub builds: usize,
}

impl<F: FnMut() -> bool> TurnServices for Scripted<F> {
    fn retrieve(&mut self, _: &str, k: usize) -> Result<Vec<String>, String> {
        Ok((0..k).map(|i| format!("reference {i}")).collect())
    }

    fn agent(&mut self, role: &str, _: &str) -> Result<String, String> {
        Ok(match role {
            "inspector" if (self.inspector)() => "pass".into(),
            "inspector" => "fail: roof floats above the walls".into(),
            "builder" => "add cube wall height=2".into(),
            other => format!("{other} ok"),
        })
    }

    fn tool(&mut self, _: &str, args: &BTreeMap<String, String>) -> Result<String, String> {
        self.builds += 1;
        Ok(format!("ran {}", args["cmd"]))
    }
}

pub struct Session {
    pub builds: usize,
    pub outputs: Vec<String>,
    /// Builder executions since the most recent budget reset, checked
    /// after every turn.
    pub max_between_resets: usize,
    pub complete: bool,
}

/// Drives the main template for up to `turns` turns.
pub fn drive(max: u32, turns: usize, verdicts: impl FnMut() -> bool) -> Session {
    let wf = load_template("3dify-main").expect("template");
    let mut state = wf.initial_state();
    state.set_var("max_inspection_count", Value::Num(max.into())).unwrap();
    state.set_var("remaining_inspection_count", Value::Num(max.into())).unwrap();
    let mut svc = Scripted {
        inspector: verdicts,
        builds: 0,
    };
    let mut session = Session {
        builds: 0,
        outputs: Vec::new(),
        max_between_resets: 0,
        complete: false,
    };
    let mut since_reset = 0usize;
    for _ in 0..turns {
        match run_turn(&wf, &state, "build a cottage", &mut svc) {
            Ok(r) => {
                for node in &r.trace {
                    match node.as_str() {
                        "reset_budget" => since_reset = 0,
                        "run_build" => since_reset += 1,
                        _ => {}
                    }
                    session.max_between_resets = session.max_between_resets.max(since_reset);
                }
                session.outputs.push(r.output_text);
                state = r.new_state;
            }
            Err(e) if e.is_session_complete() => {
                session.complete = true;
                break;
            }
            Err(e) => panic!("turn failed: {e}"),
        }
    }
    session.builds = svc.builds;
    session
}

pub fn run() -> Outcome {
    let mut counts = Vec::new();
    for max in 0..=10u32 {
        // Extra turns after the forced exit must not build again.
        let s = drive(max, 3 + 2 * max as usize + 6, || false);
        ensure(s.builds == max as usize, || format!("max {max}: {} builder attempts", s.builds))?;
        let last = s.outputs.last().cloned().unwrap_or_default();
        ensure(last.contains("waiting for the user"), || format!("max {max}: last output {last:?}"))?;
        ensure(!s.complete, || format!("max {max}: session completed despite failing inspections"))?;
        counts.push(s.builds);
    }
    Ok(format!(
        "always-fail inspector: attempts {counts:?} for max_inspection_count 0..=10, forced exit each time"
    ))
}

//! Runs the selection loop with the deterministic procedural provider: keep
//! one candidate, reject the rest with reasons, ask for more variety, then
//! accept everything.
//!
//! cargo run -p dccflow --example feedback_loop -- "a reading lamp" 3

use std::collections::BTreeMap;

use dccflow::agents::ProceduralProvider;
use dccflow::feedback::{start_loop, submit_selection, LoopState, LoopStatus, Selection};

fn show(state: &LoopState) {
    println!("round {} ({:?})", state.round, state.status);
    for c in &state.current {
        let mark = if state.selected_ids.contains(&c.id) { "*" } else { " " };
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("  {mark} {} {}  [{}]", c.id, c.descriptor, params.join(" "));
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let prompt = args.next().unwrap_or_else(|| "a reading lamp".into());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);

    let provider = ProceduralProvider;
    let mut state = start_loop(&prompt, n, &provider).expect("n >= 1");
    show(&state);

    let keep = state.current[0].id.clone();
    let reasons: BTreeMap<String, String> =
        state.current[1..].iter().map(|c| (c.id.clone(), "too plain".to_string())).collect();
    state = submit_selection(
        &state,
        Selection {
            selected_ids: [keep].into(),
            rejection_reasons: reasons,
            more_diversity: true,
        },
        &provider,
    )
    .expect("valid selection");
    println!("feedback sent: {}", state.feedback_log.last().map_or("", String::as_str));
    show(&state);

    let all = Selection::of(state.current.iter().map(|c| c.id.clone()));
    state = submit_selection(&state, all, &provider).expect("valid selection");
    show(&state);
    assert_eq!(state.status, LoopStatus::Finalizing);
    for h in &state.history {
        println!("history: round {} kept {:?}", h.round, h.selection.selected_ids);
    }
}

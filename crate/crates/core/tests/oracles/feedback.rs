//! Exhaustive monotone selection sequences through the feedback loop.

use std::collections::BTreeSet;

use dccflow::agents::{Candidate, ProceduralProvider};
use dccflow::dcc::ParamValue;
use dccflow::feedback::{start_loop, submit_selection, LoopState, LoopStatus, Selection};

use super::{ensure, Outcome};

/// Bit-level fingerprint: serialized form plus raw f64 bits.
fn bits(c: &Candidate) -> (String, Vec<(String, u64)>) {
    let nums = c
        .params
        .iter()
        .filter_map(|(k, v)| match v {
            ParamValue::Num(x) => Some((k.clone(), x.to_bits())),
            ParamValue::Text(_) => None,
        })
        .collect();
    (serde_json::to_string(c).unwrap(), nums)
}

pub struct Stats {
    pub sequences: usize,
    pub submissions: usize,
    pub max_rounds: u32,
}

/// Walks every sequence where each round keeps all earlier selections (by
/// slot) and adds at least one new slot. `kept` holds selected slots.
fn walk(state: &LoopState, kept: &BTreeSet<usize>, submitted: &mut Vec<Selection>, stats: &mut Stats) -> Result<(), String> {
    let n = state.n;
    let free: Vec<usize> = (0..n).filter(|s| !kept.contains(s)).collect();
    for mask in 1u32..(1 << free.len()) {
        let mut slots = kept.clone();
        slots.extend(free.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| *s));
        let sel = Selection::of(slots.iter().map(|&s| state.current[s].id.clone()));
        let next = submit_selection(state, sel.clone(), &ProceduralProvider).map_err(|e| e.to_string())?;
        stats.submissions += 1;
        submitted.push(sel);

        let path = || format!("n {n}, round {}, slots {slots:?}", state.round);
        ensure(next.current.len() == n, || format!("{}: {} candidates", path(), next.current.len()))?;
        ensure(next.round <= n as u32, || format!("{}: reached round {}", path(), next.round))?;
        ensure(next.history.len() == submitted.len(), || format!("{}: history length", path()))?;
        for (i, (h, s)) in next.history.iter().zip(submitted.iter()).enumerate() {
            ensure(h.round == i as u32 + 1 && h.selection == *s, || format!("{}: history entry {i}", path()))?;
        }
        if slots.len() == n {
            ensure(next.status == LoopStatus::Finalizing, || format!("{}: status {:?}", path(), next.status))?;
            ensure(next.current == state.current, || format!("{}: finalizing changed candidates", path()))?;
            stats.sequences += 1;
            stats.max_rounds = stats.max_rounds.max(next.round);
        } else {
            ensure(next.status == LoopStatus::Collecting, || format!("{}: status {:?}", path(), next.status))?;
            ensure(next.round == state.round + 1, || format!("{}: round did not advance", path()))?;
            for &s in &slots {
                ensure(bits(&next.current[s]) == bits(&state.current[s]), || {
                    format!("{}: slot {s} changed after being selected", path())
                })?;
            }
            let ids: BTreeSet<&String> = next.current.iter().map(|c| &c.id).collect();
            ensure(ids.len() == n, || format!("{}: duplicate candidate ids", path()))?;
            walk(&next, &slots, submitted, stats)?;
        }
        submitted.pop();
    }
    Ok(())
}

pub fn exhaustive(max_n: usize) -> Result<Stats, String> {
    let mut stats = Stats {
        sequences: 0,
        submissions: 0,
        max_rounds: 0,
    };
    for n in 1..=max_n {
        let start = start_loop("a small cottage with a pitched roof", n, &ProceduralProvider).map_err(|e| e.to_string())?;
        ensure(start.current.len() == n && start.round == 1, || format!("n {n}: bad first round"))?;
        walk(&start, &BTreeSet::new(), &mut Vec::new(), &mut stats)?;
    }
    Ok(stats)
}

/// Selecting every candidate of round 1 finalizes at once.
pub fn immediate(max_n: usize) -> Result<(), String> {
    for n in 1..=max_n {
        let start = start_loop("a lamp", n, &ProceduralProvider).map_err(|e| e.to_string())?;
        let all = Selection::of(start.current.iter().map(|c| c.id.clone()));
        let next = submit_selection(&start, all, &ProceduralProvider).map_err(|e| e.to_string())?;
        ensure(next.status == LoopStatus::Finalizing && next.round == 1, || {
            format!("n {n}: select-all gave {:?} at round {}", next.status, next.round)
        })?;
        ensure(next.accepted().len() == n, || format!("n {n}: accepted {}", next.accepted().len()))?;
    }
    Ok(())
}

pub fn run() -> Outcome {
    let s = exhaustive(6)?;
    immediate(6)?;
    Ok(format!(
        "{} monotone sequences ({} submissions) for n 1..=6 finalize within n rounds (max {}); selected slots bit-identical; select-all finalizes at round 1",
        s.sequences, s.submissions, s.max_rounds
    ))
}

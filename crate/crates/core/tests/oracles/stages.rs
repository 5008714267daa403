//! Stage machine truth table over the five default stages.

use dccflow::chatflow::{ConversationState, StageError};

use super::{ensure, Outcome};

pub const STAGES: [&str; 5] = ["Scene Analyzer", "RAG", "Conceptualization", "Builder", "Inspector"];

/// (position, dirty_bit, enable_increment) -> next position, or None when
/// the session is complete. Written out by hand: the stage advances only
/// when the bit is clear and increments are enabled.
pub const TRUTH_TABLE: [((usize, u8, u8), Option<usize>); 20] = [
    ((0, 0, 0), Some(0)),
    ((0, 0, 1), Some(1)),
    ((0, 1, 0), Some(0)),
    ((0, 1, 1), Some(0)),
    ((1, 0, 0), Some(1)),
    ((1, 0, 1), Some(2)),
    ((1, 1, 0), Some(1)),
    ((1, 1, 1), Some(1)),
    ((2, 0, 0), Some(2)),
    ((2, 0, 1), Some(3)),
    ((2, 1, 0), Some(2)),
    ((2, 1, 1), Some(2)),
    ((3, 0, 0), Some(3)),
    ((3, 0, 1), Some(4)),
    ((3, 1, 0), Some(3)),
    ((3, 1, 1), Some(3)),
    ((4, 0, 0), Some(4)),
    ((4, 0, 1), None),
    ((4, 1, 0), Some(4)),
    ((4, 1, 1), Some(4)),
];

pub fn state_at(pos: usize, dirty: u8, inc: u8) -> ConversationState {
    let mut s = ConversationState::new(STAGES.iter().map(|s| s.to_string()).collect()).unwrap();
    s.stage_num = pos;
    s.stage = STAGES[pos].to_string();
    s.dirty_bit = dirty;
    s.enable_increment = inc;
    s
}

pub fn run() -> Outcome {
    for ((pos, dirty, inc), expected) in TRUTH_TABLE {
        let s = state_at(pos, dirty, inc);
        let row = format!("stage {pos} dirty_bit {dirty} enable_increment {inc}");
        match (s.to_next_stage(), expected) {
            (Ok(next), Some(want)) => {
                ensure(next.stage_num == want, || format!("{row}: went to {} not {want}", next.stage_num))?;
                ensure(next.stage == STAGES[want], || format!("{row}: stage name {}", next.stage))?;
                ensure(next.dirty_bit == 0, || format!("{row}: dirty_bit {} after to_next_stage", next.dirty_bit))?;
                ensure(next.enable_increment == inc, || format!("{row}: enable_increment changed"))?;
                ensure(next.validate().is_ok(), || format!("{row}: invalid result"))?;
            }
            (Err(StageError::SessionComplete { last }), None) => {
                ensure(last == STAGES[4], || format!("{row}: complete at {last}"))?;
            }
            (got, _) => return Err(format!("{row}: got {got:?}, expected {expected:?}")),
        }
    }
    Ok(format!("{} rows of (stage, dirty_bit, enable_increment) match; dirty_bit always 0 after", TRUTH_TABLE.len()))
}

//! Seam for a computer-use agent driving a DCC through its GUI.
//!
//! Only the interface exists; the bundled implementation declines every
//! request so callers fall back to the console tool.

use serde::{Deserialize, Serialize};

use super::manager::RetryBudget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum UiAction {
    Click { x: u32, y: u32 },
    Type { text: String },
    Shortcut { keys: String },
    Done,
    Unsupported { reason: String },
}

pub trait ComputerUseAgent: Send + Sync {
    /// Next action given a screenshot (encoded image bytes) and a goal.
    fn act(&self, screenshot: &[u8], goal: &str) -> UiAction;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UnsupportedCua;

impl ComputerUseAgent for UnsupportedCua {
    fn act(&self, _: &[u8], _: &str) -> UiAction {
        UiAction::Unsupported {
            reason: "no GUI automation backend is configured".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CuaOutcome {
    Completed { actions: Vec<UiAction> },
    /// The backend cannot drive this GUI; retrying will not help.
    Unsupported { reason: String },
    /// The action budget ran out before the agent reported done.
    Exhausted { actions: Vec<UiAction> },
}

/// Asks `agent` for actions until it reports done, at most
/// `budget.attempts_for(complexity)` times. `screenshot` is called before
/// every action and `perform` after it.
pub fn drive(
    agent: &dyn ComputerUseAgent,
    goal: &str,
    budget: RetryBudget,
    complexity: usize,
    screenshot: &mut dyn FnMut() -> Vec<u8>,
    perform: &mut dyn FnMut(&UiAction),
) -> CuaOutcome {
    let mut actions = Vec::new();
    for _ in 0..budget.attempts_for(complexity) {
        match agent.act(&screenshot(), goal) {
            UiAction::Done => return CuaOutcome::Completed { actions },
            UiAction::Unsupported { reason } => return CuaOutcome::Unsupported { reason },
            action => {
                perform(&action);
                actions.push(action);
            }
        }
    }
    CuaOutcome::Exhausted { actions }
}

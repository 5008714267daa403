//! Independent checks shared by the integration tests and the acceptance
//! binary. Each `run` returns a one-line summary or the first failure.
#![allow(dead_code)]

pub mod chatflow;
pub mod feedback;
pub mod loop_budget;
pub mod mcp;
pub mod planner;
pub mod rag;
pub mod stages;

pub type Outcome = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

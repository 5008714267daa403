//! Plan execution through the DCC console tool.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::planner::{PlanStep, ProceduralSpec};
use super::provider::{ChatMessage, Provider, ProviderReply, MANAGER};
use super::AgentError;
use crate::dcc::server::{console_args, CONSOLE_TOOL, SNAPSHOT_TOOL};
use crate::hash::fnv1a64_hex;
use crate::mcp::{Client, ClientError, Transport};

const SYSTEM: &str = "You are the Manager. A console step failed. Reply with a tool call to \
                      run_cmd_on_default_console whose cmd holds the corrected command lines.";

/// Attempts allowed for a step: `min(cap, base + per_step * complexity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryBudget {
    pub base: u32,
    pub per_step: u32,
    pub cap: u32,
}

impl Default for RetryBudget {
    fn default() -> Self {
        Self {
            base: 2,
            per_step: 1,
            cap: 6,
        }
    }
}

impl RetryBudget {
    pub fn new(base: u32, per_step: u32, cap: u32) -> Result<Self, AgentError> {
        if base == 0 || cap == 0 {
            return Err(AgentError::InvalidBudget("base and cap must be positive".into()));
        }
        Ok(Self { base, per_step, cap })
    }

    pub fn attempts_for(&self, complexity: usize) -> u32 {
        let complexity = u32::try_from(complexity).unwrap_or(u32::MAX);
        self.cap
            .min(self.base.saturating_add(self.per_step.saturating_mul(complexity)))
            .max(1)
    }
}

pub fn compute_retry_budget(budget: &RetryBudget, complexity: usize) -> u32 {
    budget.attempts_for(complexity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Succeeded,
    /// Budget exhausted; handed to the user.
    Escalated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub description: String,
    pub attempts: u32,
    pub budget: u32,
    pub outcome: StepOutcome,
    /// Console output of the last successful command batch.
    pub output: String,
    /// One entry per failed attempt.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Escalation {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub steps: Vec<StepReport>,
    pub escalation: Option<Escalation>,
    /// Canonical scene snapshot after the last executed step.
    pub final_snapshot: String,
    /// FNV-1a-64 of `final_snapshot`.
    pub snapshot_digest: String,
}

impl ExecutionReport {
    pub fn attempts(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.attempts).collect()
    }

    pub fn completed(&self) -> bool {
        self.escalation.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManagerError {
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("transport failure: {0}")]
    Transport(ClientError),
    #[error("could not fetch the final snapshot: {0}")]
    Snapshot(ClientError),
}

/// Runs the plan step by step. A failed step is retried up to its budget,
/// with complexity = number of console commands in the step. Each step's
/// commands go out as one multi-line console call, which the simulator
/// applies atomically.
///
/// After a failure, `advisor` (if any) is asked for corrected commands; its
/// tool-call reply replaces the commands for the next attempt. Without an
/// advisor the same commands are sent again. When a step's commands applied
/// but its check failed, later attempts send only the advised corrections
/// and re-run the check.
///
/// An exhausted budget escalates to the user and halts the plan, since later
/// steps may build on the failed one.
pub fn manage_execute<T: Transport>(
    spec: &ProceduralSpec,
    client: &mut Client<T>,
    budget: RetryBudget,
    advisor: Option<&dyn Provider>,
    observer: &mut dyn FnMut(&StepReport),
) -> Result<ExecutionReport, ManagerError> {
    if spec.plan.is_empty() {
        return Err(ManagerError::EmptyPlan);
    }
    let mut steps = Vec::new();
    let mut escalation = None;
    for (index, step) in spec.plan.iter().enumerate() {
        let report = run_step(index, step, client, budget, advisor)?;
        observer(&report);
        let escalated = report.outcome == StepOutcome::Escalated;
        if escalated {
            escalation = Some(Escalation {
                step: index,
                message: format!(
                    "step {} ({}) failed after {} attempts: {}",
                    index + 1,
                    step.description,
                    report.attempts,
                    report.errors.last().map_or("", String::as_str)
                ),
            });
        }
        steps.push(report);
        if escalated {
            break;
        }
    }
    let final_snapshot = client
        .call_tool(SNAPSHOT_TOOL, Map::new())
        .map_err(ManagerError::Snapshot)?;
    Ok(ExecutionReport {
        steps,
        escalation,
        snapshot_digest: fnv1a64_hex(final_snapshot.as_bytes()),
        final_snapshot,
    })
}

fn run_step<T: Transport>(
    index: usize,
    step: &PlanStep,
    client: &mut Client<T>,
    budget: RetryBudget,
    advisor: Option<&dyn Provider>,
) -> Result<StepReport, ManagerError> {
    let limit = budget.attempts_for(step.console_cmds.len());
    let mut pending = step.console_cmds.clone();
    let mut report = StepReport {
        index,
        description: step.description.clone(),
        attempts: 0,
        budget: limit,
        outcome: StepOutcome::Escalated,
        output: String::new(),
        errors: Vec::new(),
    };
    while report.attempts < limit {
        report.attempts += 1;
        match attempt(step, &pending, client) {
            Ok(Attempt::Done(output)) => {
                report.output = output;
                report.outcome = StepOutcome::Succeeded;
                break;
            }
            Ok(Attempt::CheckFailed { output, message }) => {
                report.output = output;
                report.errors.push(message);
                pending.clear();
            }
            Err(e) if e.is_transport() => return Err(ManagerError::Transport(e)),
            Err(e) => report.errors.push(e.to_string()),
        }
        if report.attempts < limit {
            if let Some(fix) = advisor.and_then(|a| advise(a, step, &report.errors)) {
                pending = fix;
            }
        }
    }
    Ok(report)
}

enum Attempt {
    Done(String),
    CheckFailed { output: String, message: String },
}

fn attempt<T: Transport>(step: &PlanStep, cmds: &[String], client: &mut Client<T>) -> Result<Attempt, ClientError> {
    let output = if cmds.is_empty() {
        String::new()
    } else {
        client.call_tool(CONSOLE_TOOL, console_args(&cmds.join("\n")))?
    };
    let Some(check) = &step.expected_check else {
        return Ok(Attempt::Done(output));
    };
    let seen = client.call_tool(CONSOLE_TOOL, console_args(&format!("query {}", check.query)));
    match seen {
        Ok(text) if text.contains(&check.contains) => Ok(Attempt::Done(output)),
        Ok(text) => Ok(Attempt::CheckFailed {
            output,
            message: format!("check failed: query {} gave '{text}', expected '{}'", check.query, check.contains),
        }),
        Err(e) if e.is_transport() => Err(e),
        Err(e) => Ok(Attempt::CheckFailed {
            output,
            message: format!("check failed: {e}"),
        }),
    }
}

fn advise(advisor: &dyn Provider, step: &PlanStep, errors: &[String]) -> Option<Vec<String>> {
    let mut ctx = vec![ChatMessage::system(SYSTEM)];
    for (i, e) in errors.iter().enumerate() {
        ctx.push(ChatMessage::user(format!(
            "Step: {}\nCommands:\n{}\nAttempt {} error: {e}",
            step.description,
            step.console_cmds.join("\n"),
            i + 1
        )));
    }
    match advisor.complete(MANAGER, &ctx).ok()? {
        ProviderReply::ToolCall { tool, args } if tool == CONSOLE_TOOL => {
            let cmd = args.get("cmd").and_then(Value::as_str)?;
            Some(cmd.lines().map(str::to_string).filter(|l| !l.trim().is_empty()).collect())
        }
        _ => None,
    }
}

//! Agent roles and the provider seam they talk through.
//!
//! Every role is a function of a [`Provider`] and explicit inputs; nothing
//! here holds conversation state between calls.

pub mod cua;
pub mod manager;
pub mod planner;
pub mod procedural;
pub mod provider;
pub mod scripted;
pub mod visualizer;

pub use manager::{compute_retry_budget, manage_execute, ExecutionReport, ManagerError, RetryBudget, StepOutcome, StepReport};
pub use planner::{extract_scopes, plan_from_selection, ExpectedCheck, PlanStep, ProceduralSpec, Scope};
pub use procedural::ProceduralProvider;
pub use provider::{CandidateDraft, ChatMessage, MessageRole, Provider, ProviderError, ProviderReply, MANAGER, PLANNER, VISUALIZER};
pub use scripted::{FixtureError, ScriptedProvider, FIXTURE_SCHEMA};
pub use visualizer::{make_candidate, visualize_candidates, Candidate, Prior};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("candidate count must be at least 1")]
    BadCount,
    #[error("expected {expected} candidates, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("{role} replied with a {got}, expected a {expected}")]
    UnexpectedReply {
        role: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("no candidates selected")]
    EmptySelection,
    #[error("candidate '{candidate}' has a different parameter set from the rest of the selection")]
    HeterogeneousParams { candidate: String },
    #[error("parameter '{param}' mixes numbers and text across the selection")]
    MixedParamTypes { param: String },
    #[error("plan is not valid JSON: {0}")]
    PlanParse(String),
    #[error("plan step {step}: {message}")]
    PlanStep { step: usize, message: String },
    #[error("invalid retry budget: {0}")]
    InvalidBudget(String),
}

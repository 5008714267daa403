//! The candidate selection loop: rounds of `n` candidates until the user
//! keeps all of them, then finalization into full scenes.
//!
//! Operations take the current [`LoopState`] by reference and return the next
//! one, so a failed provider call leaves the caller's state untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::visualizer::{feedback_message, Prior};
use crate::agents::{
    manage_execute, plan_from_selection, visualize_candidates, AgentError, Candidate, ExecutionReport, ManagerError,
    ProceduralSpec, Provider, RetryBudget, StepReport,
};
use crate::dcc::server::spawn_embedded;
use crate::mcp::{Client, ClientError, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStatus {
    Collecting,
    Finalizing,
    Done,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub selected_ids: BTreeSet<String>,
    /// Keyed by rejected candidate id; optional per id.
    #[serde(default)]
    pub rejection_reasons: BTreeMap<String, String>,
    /// The user finds the candidates too similar.
    #[serde(default)]
    pub more_diversity: bool,
}

impl Selection {
    pub fn of<I: IntoIterator<Item = S>, S: Into<String>>(ids: I) -> Self {
        Self {
            selected_ids: ids.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: u32,
    #[serde(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub prompt: String,
    pub n: usize,
    pub round: u32,
    pub current: Vec<Candidate>,
    pub selected_ids: BTreeSet<String>,
    pub history: Vec<HistoryEntry>,
    pub status: LoopStatus,
    /// Feedback messages sent to the visualizer so far, oldest first.
    #[serde(default)]
    pub feedback_log: Vec<String>,
    /// Rounds allowed before the loop ends with partial acceptance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
}

impl LoopState {
    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.current.iter().find(|c| c.id == id)
    }

    /// Candidates the user has accepted so far, in slot order.
    pub fn accepted(&self) -> Vec<&Candidate> {
        self.current.iter().filter(|c| self.selected_ids.contains(&c.id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoopError {
    #[error("candidate count must be at least 1")]
    BadCount,
    #[error("loop is {0:?}, not collecting selections")]
    NotCollecting(LoopStatus),
    #[error("candidate '{0}' is not in the current round")]
    UnknownCandidate(String),
    #[error("rejection reason given for selected candidate '{0}'")]
    ReasonOnSelected(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

pub fn start_loop(prompt: &str, n: usize, provider: &dyn Provider) -> Result<LoopState, LoopError> {
    if n == 0 {
        return Err(LoopError::BadCount);
    }
    let current = visualize_candidates(provider, prompt, n, None)?;
    Ok(LoopState {
        prompt: prompt.to_string(),
        n,
        round: 1,
        current,
        selected_ids: BTreeSet::new(),
        history: Vec::new(),
        status: LoopStatus::Collecting,
        feedback_log: Vec::new(),
        max_rounds: None,
    })
}

pub fn validate_selection(state: &LoopState, sel: &Selection) -> Result<(), LoopError> {
    if state.status != LoopStatus::Collecting {
        return Err(LoopError::NotCollecting(state.status));
    }
    for id in sel.selected_ids.iter().chain(sel.rejection_reasons.keys()) {
        if state.candidate(id).is_none() {
            return Err(LoopError::UnknownCandidate(id.clone()));
        }
    }
    if let Some(id) = sel.rejection_reasons.keys().find(|id| sel.selected_ids.contains(*id)) {
        return Err(LoopError::ReasonOnSelected(id.clone()));
    }
    Ok(())
}

/// Records a selection. Selecting all `n` moves the loop to finalizing;
/// otherwise the next round keeps the selected candidates in their slots and
/// regenerates the rest, with rejection reasons in the provider context.
pub fn submit_selection(state: &LoopState, sel: Selection, provider: &dyn Provider) -> Result<LoopState, LoopError> {
    validate_selection(state, &sel)?;
    let mut next = state.clone();
    next.history.push(HistoryEntry {
        round: state.round,
        selection: sel.clone(),
    });
    next.selected_ids = sel.selected_ids.clone();
    if sel.selected_ids.len() == state.n {
        next.status = LoopStatus::Finalizing;
        return Ok(next);
    }
    if state.max_rounds.is_some_and(|max| state.round >= max) {
        next.status = LoopStatus::Done;
        return Ok(next);
    }
    let prior = Prior {
        round: state.round + 1,
        current: &state.current,
        selected_ids: &sel.selected_ids,
        rejection_reasons: &sel.rejection_reasons,
        more_diversity: sel.more_diversity,
        earlier_feedback: &state.feedback_log,
    };
    next.current = visualize_candidates(provider, &state.prompt, state.n, Some(&prior))?;
    next.feedback_log.push(feedback_message(&prior));
    next.round += 1;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateBuild {
    pub candidate_id: String,
    pub report: ExecutionReport,
}

impl CandidateBuild {
    pub fn complete(&self) -> bool {
        self.report.completed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizationResult {
    pub spec: ProceduralSpec,
    /// One per accepted candidate, in slot order.
    pub builds: Vec<CandidateBuild>,
}

impl FinalizationResult {
    pub fn build(&self, candidate_id: &str) -> Option<&CandidateBuild> {
        self.builds.iter().find(|b| b.candidate_id == candidate_id)
    }

    pub fn incomplete(&self) -> Vec<&str> {
        self.builds.iter().filter(|b| !b.complete()).map(|b| b.candidate_id.as_str()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FinalizeError {
    #[error("loop is {0:?}, not finalizing")]
    NotFinalizing(LoopStatus),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("could not connect to the DCC: {0}")]
    Connect(ClientError),
    #[error("candidate '{candidate}': {source}")]
    Execution {
        candidate: String,
        #[source]
        source: ManagerError,
    },
}

/// Where finalization builds scenes: each call yields an initialized client
/// over a fresh, empty scene.
pub trait SceneFactory {
    type T: Transport;
    fn connect(&mut self) -> Result<Client<Self::T>, ClientError>;
}

/// Fresh in-process simulators.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddedScenes;

impl SceneFactory for EmbeddedScenes {
    type T = crate::mcp::transport::PipeTransport;

    fn connect(&mut self) -> Result<Client<Self::T>, ClientError> {
        let (mut client, _) = spawn_embedded();
        client.initialize()?;
        Ok(client)
    }
}

pub struct Finalizer<'a> {
    pub planner: &'a dyn Provider,
    /// Consulted for corrected commands when a step fails.
    pub advisor: Option<&'a dyn Provider>,
    pub knowledge: &'a str,
    pub budget: RetryBudget,
}

/// Builds every accepted candidate. The Planner sees the whole accepted set
/// once (so scopes span it), then the plan is instantiated and executed per
/// candidate on a fresh scene. An escalated step marks that candidate
/// incomplete without stopping the others.
pub fn finalize<F: SceneFactory>(
    state: &LoopState,
    services: &Finalizer<'_>,
    scenes: &mut F,
    observer: &mut dyn FnMut(&str, &StepReport),
) -> Result<(LoopState, FinalizationResult), FinalizeError> {
    if state.status != LoopStatus::Finalizing {
        return Err(FinalizeError::NotFinalizing(state.status));
    }
    let accepted: Vec<Candidate> = state.accepted().into_iter().cloned().collect();
    let spec = plan_from_selection(services.planner, &accepted, services.knowledge)?;
    let mut builds = Vec::new();
    for c in &accepted {
        let concrete = spec.instantiate(c)?;
        let mut client = scenes.connect().map_err(FinalizeError::Connect)?;
        let report = manage_execute(&concrete, &mut client, services.budget, services.advisor, &mut |s| observer(&c.id, s))
            .map_err(|source| FinalizeError::Execution {
                candidate: c.id.clone(),
                source,
            })?;
        builds.push(CandidateBuild {
            candidate_id: c.id.clone(),
            report,
        });
    }
    let mut done = state.clone();
    done.status = LoopStatus::Done;
    Ok((done, FinalizationResult { spec, builds }))
}

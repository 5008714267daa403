//! One scene request from prompt to built scenes, independent of transport.
//!
//! A [`SessionCore`] owns the conversation state, the selection loop, the
//! finalization results and an ordered, gap-free event log. Callers
//! serialize access to it; every method either commits fully or leaves the
//! session unchanged, except that a selection which reaches finalization is
//! committed before the (fallible) build runs.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::agents::{ProceduralSpec, Provider, RetryBudget, StepOutcome};
use crate::chatflow::{load_template, ConversationState, Value};
use crate::dcc::server::spawn_embedded;
use crate::feedback::{
    finalize, start_loop, submit_selection, CandidateBuild, FinalizeError, Finalizer, LoopError, LoopState, LoopStatus,
    SceneFactory, Selection,
};
use crate::mcp::transport::{tcp_connect, ChildTransport, Recording};
use crate::mcp::{Client, ClientError, Transport};
use crate::rag::{MockEmbedder, RagIndex};

pub const MAX_CANDIDATES: usize = 16;
pub const MAIN_TEMPLATE: &str = "3dify-main";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    RoundOpened {
        round: u32,
        candidate_ids: Vec<String>,
    },
    FinalizationStep {
        candidate_id: String,
        step: usize,
        description: String,
        attempts: u32,
        outcome: StepOutcome,
    },
    Escalation {
        candidate_id: String,
        step: usize,
        message: String,
    },
    Done {
        /// Built without escalation.
        complete: Vec<String>,
        incomplete: Vec<String>,
        /// The round cap ended the loop before every candidate was kept.
        partial: bool,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::RoundOpened { .. } => "round_opened",
            Event::FinalizationStep { .. } => "finalization_step",
            Event::Escalation { .. } => "escalation",
            Event::Done { .. } => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// 0-based, gap-free per session.
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
    #[serde(default)]
    pub budget: RetryBudget,
    /// Parents retrieved for the planner's reference knowledge.
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
}

fn default_k() -> usize {
    3
}

impl SessionConfig {
    pub fn with_n(n: usize) -> Self {
        Self {
            n,
            max_rounds: None,
            budget: RetryBudget::default(),
            retrieval_k: default_k(),
        }
    }
}

/// Where scenes are built.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DccEndpoint {
    /// A fresh in-process simulator per build.
    #[default]
    Embedded,
    /// A TCP server that opens a fresh scene per connection.
    Tcp(String),
    /// A program speaking the protocol on stdio, spawned per build.
    Command { program: String, args: Vec<String> },
}

/// [`SceneFactory`] over a [`DccEndpoint`], optionally recording every
/// protocol line into a shared transcript.
#[derive(Clone, Default)]
pub struct Scenes {
    pub endpoint: DccEndpoint,
    pub transcript: Option<Arc<Mutex<Vec<String>>>>,
}

impl SceneFactory for Scenes {
    type T = Box<dyn Transport>;

    fn connect(&mut self) -> Result<Client<Self::T>, ClientError> {
        let raw: Box<dyn Transport> = match &self.endpoint {
            DccEndpoint::Embedded => Box::new(spawn_embedded().0.into_transport()),
            DccEndpoint::Tcp(addr) => Box::new(tcp_connect(addr)?),
            DccEndpoint::Command { program, args } => Box::new(ChildTransport::spawn(program, args)?),
        };
        let transport: Box<dyn Transport> = match &self.transcript {
            Some(log) => Box::new(Recording::with_log(raw, Arc::clone(log))),
            None => raw,
        };
        let mut client = Client::new(transport);
        client.initialize()?;
        Ok(client)
    }
}

/// Shared by every session of a service.
#[derive(Clone)]
pub struct Services {
    /// Serves every role: visualizer, planner and manager.
    pub provider: Arc<dyn Provider>,
    pub rag: Option<Arc<RagIndex>>,
    pub scenes: Scenes,
}

impl Services {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self {
            provider,
            rag: None,
            scenes: Scenes::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("candidate count must be in 1..={MAX_CANDIDATES}, got {0}")]
    BadCount(usize),
    #[error("selection answers round {got}, current round is {current}")]
    StaleRound { got: u32, current: u32 },
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Finalize(#[from] FinalizeError),
}

impl PipelineError {
    /// True when a provider could not be reached or had no reply.
    pub fn is_provider_failure(&self) -> bool {
        use crate::agents::AgentError;
        matches!(
            self,
            PipelineError::Loop(LoopError::Agent(AgentError::Provider(_)))
                | PipelineError::Finalize(FinalizeError::Agent(AgentError::Provider(_)))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCore {
    pub prompt: String,
    pub config: SessionConfig,
    pub conversation: ConversationState,
    #[serde(rename = "loop")]
    pub loop_state: LoopState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProceduralSpec>,
    #[serde(default)]
    pub builds: Vec<CandidateBuild>,
    #[serde(default)]
    pub events: Vec<SessionEvent>,
}

impl SessionCore {
    /// Retrieves reference knowledge for the prompt and opens round 1.
    pub fn create(prompt: &str, config: SessionConfig, services: &Services) -> Result<Self, PipelineError> {
        if prompt.trim().is_empty() {
            return Err(PipelineError::EmptyPrompt);
        }
        if !(1..=MAX_CANDIDATES).contains(&config.n) {
            return Err(PipelineError::BadCount(config.n));
        }
        let knowledge = services.rag.as_ref().map_or_else(String::new, |rag| {
            rag.query(prompt, config.retrieval_k, &MockEmbedder)
                .into_iter()
                .map(|h| h.parent.text)
                .collect::<Vec<_>>()
                .join("\n\n")
        });
        let mut conversation = load_template(MAIN_TEMPLATE)
            .expect("main template ships with the crate")
            .initial_state()
            .set_stage("Conceptualization")
            .expect("template stage");
        conversation
            .set_var("scene_brief", Value::Str(prompt.into()))
            .and_then(|_| conversation.set_var("knowledge", Value::Str(knowledge)))
            .expect("template variables");
        let mut loop_state = start_loop(prompt, config.n, services.provider.as_ref())?;
        loop_state.max_rounds = config.max_rounds;
        let mut core = Self {
            prompt: prompt.into(),
            config,
            conversation,
            loop_state,
            spec: None,
            builds: Vec::new(),
            events: Vec::new(),
        };
        core.push_round_opened();
        Ok(core)
    }

    pub fn status(&self) -> LoopStatus {
        self.loop_state.status
    }

    fn push(&mut self, event: Event) {
        let seq = self.events.len() as u64;
        self.events.push(SessionEvent { seq, event });
    }

    fn push_round_opened(&mut self) {
        self.push(Event::RoundOpened {
            round: self.loop_state.round,
            candidate_ids: self.loop_state.current.iter().map(|c| c.id.clone()).collect(),
        });
    }

    pub fn knowledge(&self) -> String {
        self.conversation.get_var("knowledge").map(|v| v.render()).unwrap_or_default()
    }

    /// Applies a selection answering `round` (when given). Reaching
    /// finalization builds every accepted candidate before returning.
    pub fn select(&mut self, round: Option<u32>, sel: Selection, services: &Services) -> Result<(), PipelineError> {
        if let Some(got) = round {
            if got != self.loop_state.round && self.loop_state.status == LoopStatus::Collecting {
                return Err(PipelineError::StaleRound {
                    got,
                    current: self.loop_state.round,
                });
            }
        }
        let next = submit_selection(&self.loop_state, sel, services.provider.as_ref())?;
        self.loop_state = next;
        match self.loop_state.status {
            LoopStatus::Collecting => self.push_round_opened(),
            LoopStatus::Finalizing => self.finalize(services)?,
            LoopStatus::Done => self.push(Event::Done {
                complete: Vec::new(),
                incomplete: Vec::new(),
                partial: true,
            }),
        }
        Ok(())
    }

    /// Builds every accepted candidate. Only valid while finalizing; callers
    /// may use it to retry after a failed build.
    pub fn finalize(&mut self, services: &Services) -> Result<(), PipelineError> {
        let concept: Vec<String> = self.loop_state.accepted().iter().map(|c| c.descriptor.clone()).collect();
        let knowledge = self.knowledge();
        let finalizer = Finalizer {
            planner: services.provider.as_ref(),
            advisor: Some(services.provider.as_ref()),
            knowledge: &knowledge,
            budget: self.config.budget,
        };
        let mut scenes = services.scenes.clone();
        let mut steps = Vec::new();
        let (done, result) = finalize(&self.loop_state, &finalizer, &mut scenes, &mut |id, s| {
            steps.push((id.to_string(), s.clone()));
        })?;
        for (candidate_id, s) in steps {
            self.push(Event::FinalizationStep {
                candidate_id: candidate_id.clone(),
                step: s.index,
                description: s.description.clone(),
                attempts: s.attempts,
                outcome: s.outcome,
            });
            if s.outcome == StepOutcome::Escalated {
                let build = result.build(&candidate_id).expect("step belongs to a build");
                let message = build.report.escalation.as_ref().map(|e| e.message.clone()).unwrap_or_default();
                self.push(Event::Escalation {
                    candidate_id,
                    step: s.index,
                    message,
                });
            }
        }
        let (complete, incomplete): (Vec<&CandidateBuild>, Vec<&CandidateBuild>) =
            result.builds.iter().partition(|b| b.complete());
        let ids = |v: Vec<&CandidateBuild>| v.into_iter().map(|b| b.candidate_id.clone()).collect::<Vec<_>>();
        let (complete, incomplete) = (ids(complete), ids(incomplete));
        let mut conversation = self.conversation.set_stage(if incomplete.is_empty() { "Inspector" } else { "Builder" })
            .expect("template stage");
        conversation
            .set_var("concept", Value::Str(concept.join("\n")))
            .expect("template variable");
        self.conversation = conversation;
        self.loop_state = done;
        self.spec = Some(result.spec);
        self.builds = result.builds;
        self.push(Event::Done {
            complete,
            incomplete,
            partial: false,
        });
        Ok(())
    }

    pub fn build(&self, candidate_id: &str) -> Option<&CandidateBuild> {
        self.builds.iter().find(|b| b.candidate_id == candidate_id)
    }

    /// Final scene snapshot of a built candidate.
    pub fn scene(&self, candidate_id: &str) -> Option<&str> {
        self.build(candidate_id).map(|b| b.report.final_snapshot.as_str())
    }

    pub fn events_since(&self, seq: u64) -> &[SessionEvent] {
        let start = usize::try_from(seq).unwrap_or(usize::MAX).min(self.events.len());
        &self.events[start..]
    }
}

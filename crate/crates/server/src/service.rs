//! Session lifecycle: creation, serialized mutation, journaling and restore.
//!
//! Each session has one executor lock. A mutation that finds it taken is
//! rejected with a conflict instead of queueing, so concurrent selections
//! never overwrite each other. Reads see the latest committed state.
//!
//! The journal is one JSON-lines file per session under the journal dir,
//! holding every committed request. On startup the files are replayed
//! against the configured providers to rebuild the sessions.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex};

use dccflow::agents::RetryBudget;
use dccflow::chatflow::ConversationState;
use dccflow::feedback::{CandidateBuild, LoopState, LoopStatus, Selection};
use dccflow::pipeline::{PipelineError, Services, SessionConfig, SessionCore, SessionEvent};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub prompt: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<RetryBudget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    /// The round this selection answers.
    pub round: u32,
    #[serde(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum JournalEntry {
    Create { at: DateTime<Utc>, prompt: String, config: SessionConfig },
    Select { at: DateTime<Utc>, request: SelectionRequest },
    Finalize { at: DateTime<Utc> },
}

#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub core: SessionCore,
}

/// The session as returned by the API.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView<'a> {
    pub id: &'a str,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub prompt: &'a str,
    pub status: LoopStatus,
    pub config: &'a SessionConfig,
    pub conversation: &'a ConversationState,
    #[serde(rename = "loop")]
    pub loop_state: &'a LoopState,
    pub reports: &'a [CandidateBuild],
    pub event_count: usize,
}

impl SessionRecord {
    pub fn view(&self) -> SessionView<'_> {
        SessionView {
            id: &self.id,
            created_at: self.created_at,
            updated_at: self.updated_at,
            prompt: &self.core.prompt,
            status: self.core.status(),
            config: &self.core.config,
            conversation: &self.core.conversation,
            loop_state: &self.core.loop_state,
            reports: &self.core.builds,
            event_count: self.core.events.len(),
        }
    }
}

pub struct Slot {
    state: RwLock<SessionRecord>,
    executor: Mutex<()>,
    events: watch::Sender<u64>,
}

impl Slot {
    fn new(record: SessionRecord) -> Self {
        let count = record.core.events.len() as u64;
        Self {
            state: RwLock::new(record),
            executor: Mutex::new(()),
            events: watch::channel(count).0,
        }
    }

    pub fn read<R>(&self, f: impl FnOnce(&SessionRecord) -> R) -> R {
        f(&self.state.read().unwrap())
    }

    pub fn events_since(&self, seq: u64) -> Vec<SessionEvent> {
        self.read(|r| r.core.events_since(seq).to_vec())
    }

    /// Changes whenever new events are committed.
    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.events.subscribe()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub journal_dir: Option<PathBuf>,
    /// Applied to sessions that do not ask for a cap themselves.
    pub max_rounds: Option<u32>,
}

pub struct SessionService {
    services: Services,
    options: ServiceOptions,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
}

fn journal_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

fn append(dir: &Path, id: &str, entry: &JournalEntry) -> Result<(), ApiError> {
    let line = serde_json::to_string(entry).expect("journal entry serializes") + "\n";
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::OpenOptions::new().create(true).append(true).open(journal_path(dir, id)))
        .and_then(|mut f| f.write_all(line.as_bytes()).and_then(|_| f.sync_data()))
        .map_err(|e| ApiError::internal(format!("journal write failed: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

impl SessionService {
    /// Restores journaled sessions. Sessions whose journal no longer replays
    /// (for example after the fixtures changed) are skipped with a warning.
    pub fn new(services: Services, options: ServiceOptions) -> std::io::Result<Self> {
        let service = Self {
            services,
            options,
            sessions: RwLock::new(BTreeMap::new()),
        };
        if let Some(dir) = &service.options.journal_dir {
            if dir.is_dir() {
                let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
                    .collect();
                files.sort();
                for path in files {
                    let id = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
                    match service.restore(&id, &std::fs::read_to_string(&path)?) {
                        Ok(record) => {
                            service.sessions.write().unwrap().insert(id, Arc::new(Slot::new(record)));
                        }
                        Err(e) => tracing::warn!(session = %id, "journal not restored: {e}"),
                    }
                }
            }
        }
        Ok(service)
    }

    fn restore(&self, id: &str, journal: &str) -> Result<SessionRecord, String> {
        let mut record: Option<SessionRecord> = None;
        for (i, line) in journal.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let entry: JournalEntry = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            let fail = |e: PipelineError| format!("line {}: {e}", i + 1);
            match (entry, record.as_mut()) {
                (JournalEntry::Create { at, prompt, config }, None) => {
                    let core = SessionCore::create(&prompt, config, &self.services).map_err(fail)?;
                    record = Some(SessionRecord {
                        id: id.into(),
                        created_at: at,
                        updated_at: at,
                        core,
                    });
                }
                (JournalEntry::Select { at, request }, Some(r)) => {
                    r.core
                        .select(Some(request.round), request.selection, &self.services)
                        .map_err(fail)?;
                    r.updated_at = r.updated_at.max(at);
                }
                (JournalEntry::Finalize { at }, Some(r)) => {
                    r.core.finalize(&self.services).map_err(fail)?;
                    r.updated_at = r.updated_at.max(at);
                }
                _ => return Err(format!("line {}: out of order", i + 1)),
            }
        }
        record.ok_or_else(|| "empty journal".into())
    }

    pub fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().unwrap().keys().cloned().collect()
    }

    pub async fn create(&self, req: CreateRequest) -> Result<Arc<Slot>, ApiError> {
        let config = SessionConfig {
            max_rounds: req.max_rounds.or(self.options.max_rounds),
            budget: req.budget.unwrap_or_default(),
            ..SessionConfig::with_n(req.n)
        };
        if let Some(b) = req.budget {
            RetryBudget::new(b.base, b.per_step, b.cap).map_err(|e| ApiError::new(400, "invalid_budget", e.to_string()))?;
        }
        let services = self.services.clone();
        let prompt = req.prompt.clone();
        let core = blocking(move || SessionCore::create(&prompt, config, &services)).await??;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let at = Utc::now();
        if let Some(dir) = &self.options.journal_dir {
            append(dir, &id, &JournalEntry::Create { at, prompt: req.prompt, config })?;
        }
        let slot = Arc::new(Slot::new(SessionRecord {
            id: id.clone(),
            created_at: at,
            updated_at: at,
            core,
        }));
        self.sessions.write().unwrap().insert(id, Arc::clone(&slot));
        Ok(slot)
    }

    /// Runs `op` on a copy of the session under its executor lock and
    /// commits the result (journal first).
    async fn mutate(
        &self,
        id: &str,
        entry: impl FnOnce(DateTime<Utc>) -> JournalEntry,
        op: impl FnOnce(&mut SessionCore, &Services) -> Result<(), PipelineError> + Send + 'static,
    ) -> Result<Arc<Slot>, ApiError> {
        let slot = self.slot(id)?;
        let Ok(guard) = slot.executor.try_lock() else {
            return Err(ApiError::new(409, "selection_conflict", "another request is being applied to this session"));
        };
        let mut core = slot.read(|r| r.core.clone());
        let services = self.services.clone();
        let (core, result) = blocking(move || {
            let result = op(&mut core, &services);
            (core, result)
        })
        .await?;
        // A selection that reached finalization is kept even if the build
        // failed, so the client can retry finalization.
        let committed = match &result {
            Ok(()) => true,
            Err(PipelineError::Finalize(_)) => core.status() == LoopStatus::Finalizing,
            Err(_) => false,
        };
        if committed {
            let at = Utc::now();
            if let Some(dir) = &self.options.journal_dir {
                append(dir, id, &entry(at))?;
            }
            let count = {
                let mut state = slot.state.write().unwrap();
                state.updated_at = state.updated_at.max(at);
                state.core = core;
                state.core.events.len() as u64
            };
            slot.events.send_replace(count);
        }
        drop(guard);
        result?;
        Ok(slot)
    }

    pub async fn select(&self, id: &str, req: SelectionRequest) -> Result<Arc<Slot>, ApiError> {
        let journaled = req.clone();
        self.mutate(
            id,
            |at| JournalEntry::Select { at, request: journaled },
            move |core, services| core.select(Some(req.round), req.selection, services),
        )
        .await
    }

    /// Retries finalization after a failed build.
    pub async fn finalize(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.mutate(id, |at| JournalEntry::Finalize { at }, |core, services| core.finalize(services))
            .await
    }
}

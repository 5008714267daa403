//! Scripted end-to-end sessions with golden artifacts.
//!
//! A scenario is a directory:
//!
//! ```text
//! scenario.json     prompt, n, selection sequence, optional budget and corpus
//! providers.json    provider-fixture/1 document serving every role
//! golden/           expected artifacts, compared byte for byte
//! ```
//!
//! `scenario.json`:
//!
//! ```json
//! {
//!   "schema": "scenario/1",
//!   "prompt": "Create a desktop gaming PC model",
//!   "n": 3,
//!   "fixtures": "providers.json",
//!   "corpus": ["docs"],
//!   "budget": {"base": 2, "per_step": 1, "cap": 6},
//!   "selections": [
//!     {"round": 1, "selected_ids": ["r1s1"], "rejection_reasons": {"r1s2": "too small"}},
//!     {"round": 2, "selected_ids": ["r1s1", "r2s2", "r2s3"]}
//!   ]
//! }
//! ```
//!
//! A replay writes these artifacts:
//!
//! ```text
//! events.jsonl            session events, one per line
//! spec.json               the procedural spec used for finalization
//! reports.json            execution report per accepted candidate
//! scenes/<id>.json        final scene snapshot per accepted candidate
//! thumbnails/<id>.svg     preview of every candidate in the last round
//! mcp-transcript.txt      every protocol line exchanged with the DCC
//! ```

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::agents::{RetryBudget, ScriptedProvider};
use crate::feedback::Selection;
use crate::pipeline::{Services, SessionConfig, SessionCore};
use crate::rag::{ingest_paths, ChunkConfig, MockEmbedder};

pub const SCENARIO_SCHEMA: &str = "scenario/1";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const GOLDEN_DIR: &str = "golden";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSelection {
    pub round: u32,
    #[serde(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub prompt: String,
    pub n: usize,
    #[serde(default = "default_fixtures")]
    pub fixtures: String,
    #[serde(default)]
    pub corpus: Vec<PathBuf>,
    #[serde(default)]
    pub budget: RetryBudget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u32>,
    pub selections: Vec<ScriptedSelection>,
}

fn default_fixtures() -> String {
    "providers.json".into()
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("replay failed: {0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.into(),
        source,
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn load_scenario(dir: &Path) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(&read(&dir.join(SCENARIO_FILE))?)
        .map_err(|e| ScenarioError::Validation(format!("{SCENARIO_FILE}: {e}")))?;
    if scenario.schema != SCENARIO_SCHEMA {
        return Err(ScenarioError::Validation(format!(
            "unsupported schema '{}', expected '{SCENARIO_SCHEMA}'",
            scenario.schema
        )));
    }
    if scenario.selections.is_empty() {
        return Err(ScenarioError::Validation("no selections given".into()));
    }
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub path: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub session: SessionCore,
    /// Artifact paths relative to the artifact dir, sorted.
    pub artifacts: Vec<String>,
    pub mismatches: Vec<Mismatch>,
    pub goldens_checked: usize,
}

impl ReplayOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs the scenario in `dir`, writes artifacts into `out` and compares
/// every file under `dir/golden` with the same-named artifact. With
/// `bless`, the goldens are overwritten from the artifacts instead.
pub fn replay(dir: &Path, out: &Path, bless: bool) -> Result<ReplayOutcome, ScenarioError> {
    let scenario = load_scenario(dir)?;
    let provider = ScriptedProvider::from_json(&read(&dir.join(&scenario.fixtures))?)
        .map_err(|e| ScenarioError::Validation(e.to_string()))?;
    let transcript = Arc::new(Mutex::new(Vec::new()));
    let mut services = Services::new(Arc::new(provider));
    services.scenes.transcript = Some(Arc::clone(&transcript));
    if !scenario.corpus.is_empty() {
        let index = ingest_paths(dir, &scenario.corpus, ChunkConfig::default(), &MockEmbedder)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        services.rag = Some(Arc::new(index));
    }
    let config = SessionConfig {
        n: scenario.n,
        max_rounds: scenario.max_rounds,
        budget: scenario.budget,
        retrieval_k: 3,
    };
    let runtime = |e: crate::pipeline::PipelineError| ScenarioError::Runtime(e.to_string());
    let mut session = SessionCore::create(&scenario.prompt, config, &services).map_err(runtime)?;
    for (i, step) in scenario.selections.iter().enumerate() {
        if session.status() != crate::feedback::LoopStatus::Collecting {
            return Err(ScenarioError::Validation(format!(
                "selection {} given after the loop left collecting",
                i + 1
            )));
        }
        session
            .select(Some(step.round), step.selection.clone(), &services)
            .map_err(runtime)?;
    }
    if session.status() == crate::feedback::LoopStatus::Collecting {
        return Err(ScenarioError::Validation("selections end while the loop is still collecting".into()));
    }

    let mut files: Vec<(String, String)> = Vec::new();
    let events: String = session
        .events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect();
    files.push(("events.jsonl".into(), events));
    if let Some(spec) = &session.spec {
        files.push(("spec.json".into(), serde_json::to_string_pretty(spec).expect("spec serializes") + "\n"));
    }
    let reports: Vec<_> = session.builds.iter().collect();
    files.push(("reports.json".into(), serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"));
    for b in &session.builds {
        files.push((format!("scenes/{}.json", b.candidate_id), b.report.final_snapshot.clone()));
    }
    for c in &session.loop_state.current {
        files.push((format!("thumbnails/{}.svg", c.id), c.thumbnail.clone()));
    }
    let lines: String = transcript.lock().unwrap().iter().map(|l| format!("{l}\n")).collect();
    files.push(("mcp-transcript.txt".into(), lines));

    if out.exists() {
        std::fs::remove_dir_all(out).map_err(io_err(out))?;
    }
    for (rel, contents) in &files {
        write(&out.join(rel), contents)?;
    }
    let mut artifacts: Vec<String> = files.into_iter().map(|(p, _)| p).collect();
    artifacts.sort();

    let golden = dir.join(GOLDEN_DIR);
    let mut mismatches = Vec::new();
    let mut goldens_checked = 0;
    if bless {
        if golden.exists() {
            std::fs::remove_dir_all(&golden).map_err(io_err(&golden))?;
        }
        for rel in &artifacts {
            write(&golden.join(rel), &read(&out.join(rel))?)?;
        }
        goldens_checked = artifacts.len();
    } else {
        for rel in golden_files(&golden)? {
            goldens_checked += 1;
            let expected = read(&golden.join(&rel))?;
            match std::fs::read_to_string(out.join(&rel)) {
                Err(_) => mismatches.push(Mismatch {
                    path: rel,
                    reason: "artifact missing".into(),
                }),
                Ok(actual) if actual != expected => mismatches.push(Mismatch {
                    reason: first_difference(&expected, &actual),
                    path: rel,
                }),
                Ok(_) => {}
            }
        }
    }
    Ok(ReplayOutcome {
        session,
        artifacts,
        mismatches,
        goldens_checked,
    })
}

fn golden_files(dir: &Path) -> Result<Vec<String>, ScenarioError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), ScenarioError> {
        for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root");
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if dir.is_dir() {
        walk(dir, dir, &mut out)?;
    }
    out.sort();
    Ok(out)
}

fn first_difference(expected: &str, actual: &str) -> String {
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(e, a)| e != a)
        .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
    let show = |s: &str| s.lines().nth(line).unwrap_or("<end of file>").to_string();
    format!("line {}: expected {:?}, got {:?}", line + 1, show(expected), show(actual))
}

//! Operator commands. Exit codes: 0 success, 2 usage, 3 validation,
//! 4 golden mismatch, 5 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use dccflow::agents::{ProceduralProvider, Provider, ScriptedProvider};
use dccflow::chatflow::{load_workflow, template_source, WorkflowError};
use dccflow::dcc::server::{dcc_server, serve_dcc_mcp};
use dccflow::mcp::server::serve_tcp;
use dccflow::mcp::transport::stdio;
use dccflow::pipeline::{DccEndpoint, Services};
use dccflow::rag::{ingest_paths, ChunkConfig, MockEmbedder, RagIndex};
use dccflow::scenario::{replay, ScenarioError};

use crate::api::router;
use crate::service::{ServiceOptions, SessionService};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_GOLDEN: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "dccflow", version, about = "Procedural scene generation service and tools")]
pub struct Cli {
    /// Base directory for every relative path argument.
    #[arg(long, global = true, default_value = ".", env = "DCCFLOW_ROOT")]
    pub root: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Run the DCC simulator as a protocol server on stdio or TCP.
    DccSim {
        /// Listen address; stdio when omitted.
        #[arg(long)]
        tcp: Option<String>,
    },
    /// Chunk and embed documents into an index file.
    Ingest {
        /// Files or directories (.md and .txt files are collected).
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value_t = 1200)]
        parent: usize,
        #[arg(long, default_value_t = 200)]
        child: usize,
        #[arg(long, short, default_value = "index.ragindex.json")]
        out: PathBuf,
    },
    /// Workflow template tools.
    Workflow {
        #[command(subcommand)]
        command: WorkflowCommand,
    },
    /// Replay a scripted scenario and compare it with its goldens.
    Replay {
        scenario: PathBuf,
        /// Artifact directory [default: target/replay/<scenario name>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite the goldens with this run's artifacts.
        #[arg(long)]
        bless: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum WorkflowCommand {
    /// Check a workflow file (or shipped template name) and print diagnostics.
    Validate { path: String },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080", env = "DCCFLOW_LISTEN")]
    pub listen: String,
    /// provider-fixture/1 file; a deterministic procedural provider otherwise.
    #[arg(long, env = "DCCFLOW_FIXTURES")]
    pub fixtures: Option<PathBuf>,
    /// Session journal directory; sessions are kept in memory only otherwise.
    #[arg(long, env = "DCCFLOW_JOURNAL")]
    pub journal: Option<PathBuf>,
    /// External DCC server address instead of the embedded simulator.
    #[arg(long, env = "DCCFLOW_MCP_TCP", conflicts_with = "mcp_cmd")]
    pub mcp_tcp: Option<String>,
    /// External DCC server command line (stdio) instead of the embedded simulator.
    #[arg(long, env = "DCCFLOW_MCP_CMD")]
    pub mcp_cmd: Option<String>,
    /// ragindex/1 file used for reference knowledge.
    #[arg(long, env = "DCCFLOW_INDEX")]
    pub index: Option<PathBuf>,
    /// Built UI assets, served under /app.
    #[arg(long, env = "DCCFLOW_APP")]
    pub app: Option<PathBuf>,
    /// Rounds before a selection loop ends with partial acceptance.
    #[arg(long, env = "DCCFLOW_MAX_ROUNDS")]
    pub max_rounds: Option<u32>,
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let root = cli.root.clone();
    match cli.command {
        Command::Serve(args) => cmd_serve(&root, args, err),
        Command::DccSim { tcp } => cmd_dcc_sim(tcp, err),
        Command::Ingest {
            paths,
            parent,
            child,
            out: index_out,
        } => cmd_ingest(&root, &paths, parent, child, &index_out, out, err),
        Command::Workflow {
            command: WorkflowCommand::Validate { path },
        } => cmd_workflow_validate(&root, &path, out),
        Command::Replay { scenario, out: dir, bless } => cmd_replay(&root, &scenario, dir, bless, out, err),
    }
}

pub fn cmd_dcc_sim(tcp: Option<String>, err: &mut dyn Write) -> i32 {
    let result = match tcp {
        None => serve_dcc_mcp(&mut stdio()),
        Some(addr) => TcpListener::bind(&addr).and_then(|l| {
            let _ = writeln!(err, "dcc-sim listening on {}", l.local_addr()?);
            serve_tcp(l, || dcc_server().0)
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "dcc-sim: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn cmd_ingest(
    root: &Path,
    paths: &[PathBuf],
    parent: usize,
    child: usize,
    index_out: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let config = match ChunkConfig::new(parent, child) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "ingest: {e}");
            return EXIT_VALIDATION;
        }
    };
    let index = match ingest_paths(root, paths, config, &MockEmbedder) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "ingest: {e}");
            return EXIT_VALIDATION;
        }
    };
    let target = resolve(root, index_out);
    if let Err(e) = index.save(&target) {
        let _ = writeln!(err, "ingest: {e}");
        return EXIT_RUNTIME;
    }
    let s = index.stats();
    let _ = writeln!(
        out,
        "ingested {} documents: {} parents, {} children -> {}",
        s.documents,
        s.parents,
        s.children,
        index_out.display()
    );
    EXIT_OK
}

/// Accepts a path, a path without its `.json` extension, or the name of a
/// shipped template.
fn workflow_source(root: &Path, path: &str) -> Option<String> {
    let p = resolve(root, Path::new(path));
    let with_ext = p.with_extension("json");
    std::fs::read_to_string(&p)
        .ok()
        .filter(|_| p.is_file())
        .or_else(|| std::fs::read_to_string(&with_ext).ok())
        .or_else(|| {
            let name = Path::new(path).file_stem()?.to_str()?;
            template_source(name).map(str::to_string)
        })
}

pub fn cmd_workflow_validate(root: &Path, path: &str, out: &mut dyn Write) -> i32 {
    let Some(source) = workflow_source(root, path) else {
        let _ = writeln!(out, "{path}: no such workflow file or template");
        return EXIT_VALIDATION;
    };
    match load_workflow(&source) {
        Ok(wf) => {
            let _ = writeln!(
                out,
                "{path}: ok, {} nodes, {} stages, 0 diagnostics",
                wf.nodes.len(),
                wf.initial_state().stages.len()
            );
            EXIT_OK
        }
        Err(WorkflowError::Parse(e)) => {
            let _ = writeln!(out, "{path}: parse error: {e}");
            EXIT_VALIDATION
        }
        Err(WorkflowError::Invalid(issues)) => {
            for i in &issues {
                let _ = writeln!(out, "{path}: {i}");
            }
            let _ = writeln!(out, "{path}: {} diagnostics", issues.len());
            EXIT_VALIDATION
        }
    }
}

pub fn cmd_replay(
    root: &Path,
    scenario: &Path,
    dir: Option<PathBuf>,
    bless: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let started = Instant::now();
    let scenario_dir = resolve(root, scenario);
    let name = scenario_dir.file_name().map_or_else(|| "scenario".into(), |n| n.to_string_lossy().to_string());
    let artifacts = dir.map_or_else(|| root.join("target/replay").join(&name), |d| resolve(root, &d));
    match replay(&scenario_dir, &artifacts, bless) {
        Ok(outcome) => {
            for m in &outcome.mismatches {
                let _ = writeln!(out, "mismatch {}: {}", m.path, m.reason);
            }
            let _ = writeln!(
                out,
                "replay {name}: {} events, {} goldens {}, {} mismatches, artifacts in {} ({} ms)",
                outcome.session.events.len(),
                outcome.goldens_checked,
                if bless { "written" } else { "checked" },
                outcome.mismatches.len(),
                artifacts.display(),
                started.elapsed().as_millis()
            );
            if outcome.passed() {
                EXIT_OK
            } else {
                EXIT_GOLDEN
            }
        }
        Err(e) => {
            let _ = writeln!(err, "replay {name}: {e}");
            match e {
                ScenarioError::Validation(_) => EXIT_VALIDATION,
                ScenarioError::Runtime(_) | ScenarioError::Io { .. } => EXIT_RUNTIME,
            }
        }
    }
}

fn build_services(root: &Path, args: &ServeArgs) -> Result<Services, String> {
    let provider: Arc<dyn Provider> = match &args.fixtures {
        Some(p) => {
            let path = resolve(root, p);
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            Arc::new(ScriptedProvider::from_json(&text).map_err(|e| e.to_string())?)
        }
        None => Arc::new(ProceduralProvider),
    };
    let mut services = Services::new(provider);
    if let Some(p) = &args.index {
        let index = RagIndex::load(&resolve(root, p), &MockEmbedder).map_err(|e| e.to_string())?;
        services.rag = Some(Arc::new(index));
    }
    services.scenes.endpoint = match (&args.mcp_tcp, &args.mcp_cmd) {
        (Some(addr), _) => DccEndpoint::Tcp(addr.clone()),
        (None, Some(cmd)) => {
            let mut parts = cmd.split_whitespace().map(str::to_string);
            let program = parts.next().ok_or("empty --mcp-cmd")?;
            DccEndpoint::Command {
                program,
                args: parts.collect(),
            }
        }
        (None, None) => DccEndpoint::Embedded,
    };
    Ok(services)
}

pub fn cmd_serve(root: &Path, args: ServeArgs, err: &mut dyn Write) -> i32 {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .try_init();
    let services = match build_services(root, &args) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "serve: {e}");
            return EXIT_VALIDATION;
        }
    };
    let options = ServiceOptions {
        journal_dir: args.journal.as_ref().map(|j| resolve(root, j)),
        max_rounds: args.max_rounds,
    };
    let service = match SessionService::new(services, options) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            let _ = writeln!(err, "serve: journal: {e}");
            return EXIT_RUNTIME;
        }
    };
    let app = router(service, args.app.as_ref().map(|a| resolve(root, a)));
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "serve: {e}");
            return EXIT_RUNTIME;
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "serve: {e}");
            EXIT_RUNTIME
        }
    }
}

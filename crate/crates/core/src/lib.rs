//! Natural-language driven procedural scene generation.
//!
//! The crate is organised around the stages a scene request moves through:
//!
//! - [`chatflow`] interprets multi-turn workflow graphs in which only
//!   conversation variables survive a turn, including stage dispatch and the
//!   builder/inspector loop budget.
//! - [`mcp`] is a small JSON-RPC 2.0 tool protocol (newline-delimited) with a
//!   client, a server framework and stdio/TCP/in-memory transports.
//! - [`dcc`] is a headless content-creation tool: a parametric scene, a
//!   dependency node graph, a console command language, canonical snapshots and
//!   SVG thumbnails, served over [`mcp`].
//! - [`agents`] holds the provider seam and the visualizer, planner and manager
//!   roles, including retry budgets.
//! - [`feedback`] runs the candidate selection loop and finalization.
//! - [`rag`] is a parent/child chunk index with exhaustive cosine retrieval.
//! - [`pipeline`] and [`scenario`] tie the above into sessions and scripted
//!   replays.
//!
//! Runnable walkthroughs for each capability live under `examples/`.

pub mod agents;
pub mod canon;
pub mod chatflow;
pub mod dcc;
pub mod feedback;
pub mod hash;
pub mod mcp;
pub mod pipeline;
pub mod rag;
pub mod scenario;

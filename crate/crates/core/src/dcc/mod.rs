//! A headless stand-in for a digital content creation tool.
//!
//! A [`Scene`] holds named parametric objects and a [`NodeGraph`] of
//! parameter bindings that is re-evaluated in topological order after every
//! mutation. The scene is driven through a line-oriented console language
//! ([`command`]) and exposed to agents as an MCP server ([`server`]).

pub mod command;
pub mod expr;
pub mod scene;
pub mod server;
pub mod snapshot;
pub mod thumbnail;

pub use command::{parse_command, parse_script, Command, Diagnostic};
pub use expr::{Expr, ParamRef};
pub use scene::{NodeGraph, ObjectKind, ParamValue, Scene, SceneError, SceneObject};
pub use snapshot::{render_summary, snapshot};
pub use thumbnail::render_thumbnail;

/// Object names: `[A-Za-z_][A-Za-z0-9_.]*`.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Parameter names: `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_valid_param(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

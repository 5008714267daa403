//! Multi-turn workflow interpretation.
//!
//! A turn runs the workflow graph from its start node to an answer node.
//! Node outputs live only for that turn; the only state carried to the next
//! turn is the [`ConversationState`], and only Assigner nodes write it.

pub mod engine;
pub mod state;
pub mod workflow;

pub use engine::{run_turn, run_turn_with_budget, NoServices, TurnError, TurnResult, TurnServices, DEFAULT_VISIT_BUDGET};
pub use state::{ConversationState, StageError, StateError, Value};
pub use workflow::{load_workflow, Issue, NodeKind, Workflow, WorkflowError};

/// Workflow templates shipped with the crate, by name.
pub const TEMPLATES: [(&str, &str); 2] = [
    ("3dify-main", include_str!("../../../../templates/3dify-main.json")),
    ("branch-util", include_str!("../../../../templates/branch-util.json")),
];

pub fn template_source(name: &str) -> Option<&'static str> {
    TEMPLATES.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn load_template(name: &str) -> Option<Workflow> {
    template_source(name).map(|src| load_workflow(src).expect("shipped templates are valid"))
}

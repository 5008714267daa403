//! Workflow documents: loading and load-time validation.
//!
//! ```json
//! {
//!   "name": "hello",
//!   "start": "start",
//!   "conversation_variables": {"stages": ["Only"]},
//!   "nodes": {
//!     "start": {"kind": "start"},
//!     "reply": {"kind": "answer", "text": "You said {{sys.query}}"}
//!   },
//!   "edges": [{"from": "start", "to": "reply"}]
//! }
//! ```
//!
//! Edge labels default to `next`. Branch nodes use one label per case plus
//! `default`. Template text interpolates `{{sys.query}}`, `{{conv.NAME}}` and
//! `{{NODE.OUTPUT}}`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{ConversationState, Value};

pub const NEXT: &str = "next";
pub const DEFAULT: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionName {
    ToNextStage,
    SetStage,
    DecrementInspection,
    ResetInspection,
}

impl FunctionName {
    /// Scratch outputs written by every function node.
    pub const OUTPUTS: [&'static str; 5] = ["stage", "stage_num", "dirty_bit", "remaining_inspection_count", "at_budget"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignOp {
    #[default]
    Set,
    Append,
    Add,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub variable: String,
    #[serde(default)]
    pub op: AssignOp,
    /// Literal operand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    /// Reference operand, e.g. `next_stage.stage_num`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Start,
    Answer {
        text: String,
    },
    Assigner {
        assignments: Vec<Assignment>,
    },
    Function {
        function: FunctionName,
        #[serde(default)]
        args: BTreeMap<String, String>,
    },
    Branch {
        /// Reference whose rendered value selects the outgoing edge.
        on: String,
        cases: Vec<String>,
        /// Cases are stage names; a value outside `stages` is an error
        /// rather than a fall-through to `default`.
        #[serde(default)]
        stage_dispatch: bool,
    },
    Retrieval {
        query: String,
        #[serde(default = "default_k")]
        k: usize,
    },
    AgentCall {
        role: String,
        prompt: String,
    },
    ToolCall {
        tool: String,
        #[serde(default)]
        args: BTreeMap<String, String>,
    },
}

fn default_k() -> usize {
    3
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Start => "start",
            NodeKind::Answer { .. } => "answer",
            NodeKind::Assigner { .. } => "assigner",
            NodeKind::Function { .. } => "function",
            NodeKind::Branch { .. } => "branch",
            NodeKind::Retrieval { .. } => "retrieval",
            NodeKind::AgentCall { .. } => "agent_call",
            NodeKind::ToolCall { .. } => "tool_call",
        }
    }

    /// Scratch values this node makes available as `ID.OUTPUT`.
    pub fn outputs(&self) -> &'static [&'static str] {
        match self {
            NodeKind::Function { .. } => &FunctionName::OUTPUTS,
            NodeKind::Retrieval { .. } => &["result"],
            NodeKind::AgentCall { .. } | NodeKind::ToolCall { .. } => &["text"],
            _ => &[],
        }
    }

    /// Outgoing edge labels this node requires.
    fn labels(&self) -> Vec<String> {
        match self {
            NodeKind::Answer { .. } => vec![],
            NodeKind::Branch { cases, .. } => cases.iter().cloned().chain([DEFAULT.to_string()]).collect(),
            _ => vec![NEXT.to_string()],
        }
    }

    fn templates(&self) -> Vec<&str> {
        match self {
            NodeKind::Answer { text } => vec![text],
            NodeKind::Function { args, .. } | NodeKind::ToolCall { args, .. } => args.values().map(String::as_str).collect(),
            NodeKind::Retrieval { query, .. } => vec![query],
            NodeKind::AgentCall { prompt, .. } => vec![prompt],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    from: String,
    #[serde(default = "next_label")]
    label: String,
    to: String,
}

fn next_label() -> String {
    NEXT.to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    name: Option<String>,
    start: String,
    #[serde(default)]
    conversation_variables: BTreeMap<String, Value>,
    nodes: BTreeMap<String, NodeKind>,
    #[serde(default)]
    edges: Vec<EdgeSpec>,
}

/// One validation finding, located at a node, an edge or the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub at: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.at, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkflowError {
    #[error("workflow parse error: {0}")]
    Parse(String),
    #[error("invalid workflow: {}", .0.iter().map(Issue::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Issue>),
}

/// A validated workflow graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    pub name: Option<String>,
    pub start: String,
    pub nodes: BTreeMap<String, NodeKind>,
    edges: BTreeMap<(String, String), String>,
    initial: ConversationState,
}

impl Workflow {
    pub fn next(&self, from: &str, label: &str) -> Option<&str> {
        self.edges.get(&(from.to_string(), label.to_string())).map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.edges.iter().map(|((f, l), t)| (f.as_str(), l.as_str(), t.as_str()))
    }

    /// Conversation state built from the declared initial values.
    pub fn initial_state(&self) -> ConversationState {
        self.initial.clone()
    }
}

pub fn load_workflow(text: &str) -> Result<Workflow, WorkflowError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| WorkflowError::Parse(e.to_string()))?;
    let mut issues = Vec::new();
    let mut issue = |at: String, message: String| issues.push(Issue { at, message });

    let initial = match ConversationState::from_vars(&doc.conversation_variables) {
        Ok(s) => Some(s),
        Err(e) => {
            issue("conversation_variables".into(), e.to_string());
            None
        }
    };

    for id in doc.nodes.keys() {
        if !is_node_id(id) {
            issue(format!("node '{id}'"), "ids must match [A-Za-z_][A-Za-z0-9_-]*".into());
        }
    }
    let starts: Vec<&String> = doc
        .nodes
        .iter()
        .filter(|(_, k)| matches!(k, NodeKind::Start))
        .map(|(id, _)| id)
        .collect();
    match doc.nodes.get(&doc.start) {
        None => issue("start".into(), format!("start node '{}' does not exist", doc.start)),
        Some(NodeKind::Start) => {}
        Some(k) => issue("start".into(), format!("start node '{}' is a {} node", doc.start, k.name())),
    }
    if starts.len() != 1 {
        issue("nodes".into(), format!("expected exactly one start node, found {}", starts.len()));
    }

    let mut edges = BTreeMap::new();
    for e in &doc.edges {
        let at = format!("edge {} -[{}]-> {}", e.from, e.label, e.to);
        if !doc.nodes.contains_key(&e.from) {
            issue(at.clone(), format!("unknown source node '{}'", e.from));
        }
        if !doc.nodes.contains_key(&e.to) {
            issue(at.clone(), format!("unknown target node '{}'", e.to));
        }
        if edges.insert((e.from.clone(), e.label.clone()), e.to.clone()).is_some() {
            issue(at, "duplicate edge label".into());
        }
    }

    for (id, kind) in &doc.nodes {
        let at = format!("node '{id}'");
        let wanted = kind.labels();
        for label in &wanted {
            if !edges.contains_key(&(id.clone(), label.clone())) {
                issue(at.clone(), format!("missing outgoing edge labelled '{label}'"));
            }
        }
        for (from, label) in edges.keys() {
            if from == id && !wanted.contains(label) {
                issue(at.clone(), format!("unexpected outgoing edge labelled '{label}'"));
            }
        }
        check_node(id, kind, &doc, initial.as_ref(), &mut issue);
    }

    // Reachability from start, and a path to an answer from every node.
    if doc.nodes.contains_key(&doc.start) {
        let reachable = reach(&doc.start, |n| {
            edges
                .iter()
                .filter(move |((f, _), _)| f == n)
                .map(|(_, t)| t.clone())
                .collect()
        });
        for id in doc.nodes.keys() {
            if !reachable.contains(id) {
                issue(format!("node '{id}'"), "not reachable from start".into());
            }
        }
    }
    let mut reaches_answer = BTreeSet::new();
    let mut queue: VecDeque<String> = doc
        .nodes
        .iter()
        .filter(|(_, k)| matches!(k, NodeKind::Answer { .. }))
        .map(|(id, _)| id.clone())
        .collect();
    while let Some(n) = queue.pop_front() {
        if reaches_answer.insert(n.clone()) {
            for ((f, _), t) in &edges {
                if *t == n && !reaches_answer.contains(f) {
                    queue.push_back(f.clone());
                }
            }
        }
    }
    for id in doc.nodes.keys() {
        if !reaches_answer.contains(id) {
            issue(format!("node '{id}'"), "no path to an answer node".into());
        }
    }

    match (issues.is_empty(), initial) {
        (true, Some(initial)) => Ok(Workflow {
            name: doc.name,
            start: doc.start,
            nodes: doc.nodes,
            edges,
            initial,
        }),
        _ => Err(WorkflowError::Invalid(issues)),
    }
}

fn reach(start: &str, succ: impl Fn(&str) -> Vec<String>) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(n) = queue.pop_front() {
        if seen.insert(n.clone()) {
            queue.extend(succ(&n));
        }
    }
    seen
}

fn is_node_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn check_node(
    id: &str,
    kind: &NodeKind,
    doc: &Document,
    initial: Option<&ConversationState>,
    issue: &mut impl FnMut(String, String),
) {
    let at = format!("node '{id}'");
    let vars = &doc.conversation_variables;
    let var_type = |name: &str| -> Option<Value> { initial.and_then(|s| s.get_var(name)) };
    let check_ref = |r: &str, issue: &mut dyn FnMut(String, String)| {
        if let Err(m) = check_reference(r, doc, initial) {
            issue(at.clone(), m);
        }
    };
    for t in kind.templates() {
        for r in template_refs(t) {
            check_ref(r, issue);
        }
    }
    match kind {
        NodeKind::Assigner { assignments } => {
            if assignments.is_empty() {
                issue(at.clone(), "assigner has no assignments".into());
            }
            for a in assignments {
                let Some(current) = var_type(&a.variable) else {
                    if initial.is_some() || !vars.contains_key(&a.variable) {
                        issue(at.clone(), format!("assigns undeclared conversation variable '{}'", a.variable));
                    }
                    continue;
                };
                let operands = a.value.is_some() as u8 + a.from.is_some() as u8;
                match (a.op, operands) {
                    (AssignOp::Clear, 0) => {}
                    (AssignOp::Clear, _) => issue(at.clone(), format!("clear of '{}' takes no operand", a.variable)),
                    (_, 1) => {}
                    _ => issue(
                        at.clone(),
                        format!("assignment to '{}' needs exactly one of 'value' or 'from'", a.variable),
                    ),
                }
                if let Some(r) = &a.from {
                    check_ref(r, issue);
                }
                let op_ok = match a.op {
                    AssignOp::Set => a.value.as_ref().is_none_or(|v| v.same_type(&current)),
                    AssignOp::Append => {
                        matches!(current, Value::List(_)) && a.value.as_ref().is_none_or(|v| matches!(v, Value::Str(_)))
                    }
                    AssignOp::Add => {
                        matches!(current, Value::Num(_)) && a.value.as_ref().is_none_or(|v| matches!(v, Value::Num(_)))
                    }
                    AssignOp::Clear => true,
                };
                if !op_ok {
                    issue(
                        at.clone(),
                        format!("operation {:?} does not fit {} variable '{}'", a.op, current.type_name(), a.variable)
                            .to_lowercase(),
                    );
                }
            }
        }
        NodeKind::Function { function, args } => {
            let expected: &[&str] = match function {
                FunctionName::SetStage => &["stage"],
                _ => &[],
            };
            for k in args.keys() {
                if !expected.contains(&k.as_str()) {
                    issue(at.clone(), format!("unexpected argument '{k}'"));
                }
            }
            for k in expected {
                if !args.contains_key(*k) {
                    issue(at.clone(), format!("missing argument '{k}'"));
                }
            }
            if let (FunctionName::SetStage, Some(stage), Some(s)) = (function, args.get("stage"), initial) {
                if template_refs(stage).is_empty() && !s.stages.contains(stage) {
                    issue(at.clone(), format!("'{stage}' is not one of the stages {:?}", s.stages));
                }
            }
        }
        NodeKind::Branch {
            on,
            cases,
            stage_dispatch,
        } => {
            check_ref(on, issue);
            let unique: BTreeSet<&String> = cases.iter().collect();
            if unique.len() != cases.len() {
                issue(at.clone(), "duplicate branch cases".into());
            }
            if cases.iter().any(|c| c == DEFAULT) {
                issue(at.clone(), "'default' is reserved for the fallback edge".into());
            }
            if let (true, Some(s)) = (stage_dispatch, initial) {
                for c in cases {
                    if !s.stages.contains(c) {
                        issue(at.clone(), format!("case '{c}' is not one of the stages"));
                    }
                }
            }
        }
        NodeKind::Retrieval { k, .. } if *k == 0 => issue(at, "k must be at least 1".into()),
        NodeKind::AgentCall { role, .. } if role.trim().is_empty() => issue(at, "role must not be empty".into()),
        NodeKind::ToolCall { tool, .. } if tool.trim().is_empty() => issue(at, "tool must not be empty".into()),
        _ => {}
    }
}

fn check_reference(r: &str, doc: &Document, initial: Option<&ConversationState>) -> Result<(), String> {
    match parse_ref(r) {
        Some(Ref::Query) => Ok(()),
        Some(Ref::Conv(name)) => match initial {
            Some(s) if s.get_var(name).is_none() => Err(format!("reference '{r}' names an undeclared variable")),
            _ => Ok(()),
        },
        Some(Ref::Node(node, out)) => match doc.nodes.get(node) {
            None => Err(format!("reference '{r}' names an unknown node")),
            Some(k) if !k.outputs().contains(&out) => {
                Err(format!("reference '{r}': {} node has no output '{out}'", k.name()))
            }
            _ => Ok(()),
        },
        None => Err(format!("malformed reference '{r}'")),
    }
}

/// A parsed value reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ref<'a> {
    Query,
    Conv(&'a str),
    Node(&'a str, &'a str),
}

pub fn parse_ref(r: &str) -> Option<Ref<'_>> {
    let (head, tail) = r.trim().split_once('.')?;
    if tail.is_empty() || head.is_empty() {
        return None;
    }
    Some(match (head, tail) {
        ("sys", "query") => Ref::Query,
        ("sys", _) => return None,
        ("conv", name) => Ref::Conv(name),
        (node, out) => Ref::Node(node, out),
    })
}

/// Splits a template into literal text and `{{ reference }}` pieces. An
/// unterminated `{{` is literal text.
pub fn template_parts(t: &str) -> Vec<Result<&str, &str>> {
    let mut parts = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find("{{") {
        let Some(close) = rest[open + 2..].find("}}") else { break };
        if open > 0 {
            parts.push(Ok(&rest[..open]));
        }
        parts.push(Err(rest[open + 2..open + 2 + close].trim()));
        rest = &rest[open + 2 + close + 2..];
    }
    if !rest.is_empty() {
        parts.push(Ok(rest));
    }
    parts
}

pub fn template_refs(t: &str) -> Vec<&str> {
    template_parts(t).into_iter().filter_map(Result::err).collect()
}

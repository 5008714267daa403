use std::collections::BTreeMap;

use super::state::{ConversationState, StageError, StateError, Value};
use super::workflow::{parse_ref, template_parts, AssignOp, FunctionName, NodeKind, Ref, Workflow, DEFAULT, NEXT};

pub const DEFAULT_VISIT_BUDGET: usize = 1000;

/// Callbacks available to Retrieval, AgentCall and ToolCall nodes.
pub trait TurnServices {
    fn retrieve(&mut self, query: &str, k: usize) -> Result<Vec<String>, String>;
    fn agent(&mut self, role: &str, prompt: &str) -> Result<String, String>;
    fn tool(&mut self, tool: &str, args: &BTreeMap<String, String>) -> Result<String, String>;
}

/// Services for workflows that make no callbacks.
pub struct NoServices;

impl TurnServices for NoServices {
    fn retrieve(&mut self, _: &str, _: usize) -> Result<Vec<String>, String> {
        Err("no retrieval service configured".into())
    }

    fn agent(&mut self, role: &str, _: &str) -> Result<String, String> {
        Err(format!("no agent configured for role '{role}'"))
    }

    fn tool(&mut self, tool: &str, _: &BTreeMap<String, String>) -> Result<String, String> {
        Err(format!("no tool service configured for '{tool}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnResult {
    pub output_text: String,
    pub new_state: ConversationState,
    /// Visited node ids, from the start node to the answer node.
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TurnError {
    #[error("node-visit budget of {0} exceeded")]
    VisitBudget(usize),
    #[error("node '{node}': callback failed: {message}")]
    Callback { node: String, message: String },
    #[error("node '{node}': branch value '{value}' is not a stage")]
    NotAStage { node: String, value: String },
    #[error("node '{node}': {source}")]
    Stage { node: String, source: StageError },
    #[error("node '{node}': {source}")]
    State { node: String, source: StateError },
    #[error("node '{node}': no value for '{reference}' in this turn")]
    MissingValue { node: String, reference: String },
}

impl TurnError {
    pub fn is_session_complete(&self) -> bool {
        matches!(
            self,
            TurnError::Stage {
                source: StageError::SessionComplete { .. },
                ..
            }
        )
    }
}

pub fn run_turn(
    workflow: &Workflow,
    state: &ConversationState,
    user_input: &str,
    services: &mut dyn TurnServices,
) -> Result<TurnResult, TurnError> {
    run_turn_with_budget(workflow, state, user_input, services, DEFAULT_VISIT_BUDGET)
}

pub fn run_turn_with_budget(
    workflow: &Workflow,
    state: &ConversationState,
    user_input: &str,
    services: &mut dyn TurnServices,
    budget: usize,
) -> Result<TurnResult, TurnError> {
    let mut turn = Turn {
        conv: state.clone(),
        scratch: BTreeMap::new(),
        query: user_input,
    };
    let mut trace = Vec::new();
    let mut current = workflow.start.as_str();
    loop {
        if trace.len() >= budget {
            return Err(TurnError::VisitBudget(budget));
        }
        trace.push(current.to_string());
        let node = &workflow.nodes[current];
        let label = match turn.step(current, node, services)? {
            Step::Done(output_text) => {
                turn.conv.validate().map_err(|source| TurnError::State {
                    node: current.to_string(),
                    source,
                })?;
                return Ok(TurnResult {
                    output_text,
                    new_state: turn.conv,
                    trace,
                });
            }
            Step::Follow(label) => label,
        };
        current = workflow
            .next(current, &label)
            .expect("validated workflows have every required edge");
    }
}

enum Step {
    Follow(String),
    Done(String),
}

struct Turn<'a> {
    conv: ConversationState,
    /// Per-turn node outputs keyed `node.output`; dropped at turn end.
    scratch: BTreeMap<String, Value>,
    query: &'a str,
}

impl Turn<'_> {
    fn resolve(&self, node: &str, r: &str) -> Result<Value, TurnError> {
        let missing = || TurnError::MissingValue {
            node: node.to_string(),
            reference: r.to_string(),
        };
        match parse_ref(r).ok_or_else(missing)? {
            Ref::Query => Ok(Value::Str(self.query.to_string())),
            Ref::Conv(name) => self.conv.get_var(name).ok_or_else(missing),
            Ref::Node(..) => self.scratch.get(r.trim()).cloned().ok_or_else(missing),
        }
    }

    fn render(&self, node: &str, template: &str) -> Result<String, TurnError> {
        let mut out = String::new();
        for part in template_parts(template) {
            match part {
                Ok(text) => out.push_str(text),
                Err(r) => out.push_str(&self.resolve(node, r)?.render()),
            }
        }
        Ok(out)
    }

    fn step(&mut self, id: &str, node: &NodeKind, services: &mut dyn TurnServices) -> Result<Step, TurnError> {
        let callback = |message: String| TurnError::Callback {
            node: id.to_string(),
            message,
        };
        match node {
            NodeKind::Start => {}
            NodeKind::Answer { text } => return Ok(Step::Done(self.render(id, text)?)),
            NodeKind::Assigner { assignments } => {
                for a in assignments {
                    let operand = match (&a.value, &a.from) {
                        (Some(v), _) => Some(v.clone()),
                        (None, Some(r)) => Some(self.resolve(id, r)?),
                        (None, None) => None,
                    };
                    let current = self.conv.get_var(&a.variable);
                    let value = assign(a.op, current, operand).map_err(|message| TurnError::State {
                        node: id.to_string(),
                        source: StateError::OutOfRange {
                            name: a.variable.clone(),
                            message,
                        },
                    })?;
                    self.conv.set_var(&a.variable, value).map_err(|source| TurnError::State {
                        node: id.to_string(),
                        source,
                    })?;
                }
            }
            NodeKind::Function { function, args } => {
                self.conv.validate().map_err(|source| TurnError::State {
                    node: id.to_string(),
                    source,
                })?;
                let stage_err = |source| TurnError::Stage {
                    node: id.to_string(),
                    source,
                };
                let (next, at_budget) = match function {
                    FunctionName::ToNextStage => (self.conv.to_next_stage().map_err(stage_err)?, false),
                    FunctionName::SetStage => {
                        let target = self.render(id, &args["stage"])?;
                        (self.conv.set_stage(target.trim()).map_err(stage_err)?, false)
                    }
                    FunctionName::DecrementInspection => self.conv.decrement_inspection(),
                    FunctionName::ResetInspection => (self.conv.reset_inspection(), false),
                };
                for out in FunctionName::OUTPUTS {
                    let v = match out {
                        "at_budget" => Value::Str(at_budget.to_string()),
                        name => next.get_var(name).expect("built-in variable"),
                    };
                    self.scratch.insert(format!("{id}.{out}"), v);
                }
            }
            NodeKind::Branch {
                on,
                cases,
                stage_dispatch,
            } => {
                let value = self.resolve(id, on)?.render();
                let value = value.trim();
                if cases.iter().any(|c| c == value) {
                    return Ok(Step::Follow(value.to_string()));
                }
                if *stage_dispatch && !self.conv.stages.iter().any(|s| s == value) {
                    return Err(TurnError::NotAStage {
                        node: id.to_string(),
                        value: value.to_string(),
                    });
                }
                return Ok(Step::Follow(DEFAULT.to_string()));
            }
            NodeKind::Retrieval { query, k } => {
                let q = self.render(id, query)?;
                let hits = services.retrieve(&q, *k).map_err(callback)?;
                self.scratch.insert(format!("{id}.result"), Value::Str(hits.join("\n\n")));
            }
            NodeKind::AgentCall { role, prompt } => {
                let p = self.render(id, prompt)?;
                let text = services.agent(role, &p).map_err(callback)?;
                self.scratch.insert(format!("{id}.text"), Value::Str(text));
            }
            NodeKind::ToolCall { tool, args } => {
                let mut rendered = BTreeMap::new();
                for (k, t) in args {
                    rendered.insert(k.clone(), self.render(id, t)?);
                }
                let text = services.tool(tool, &rendered).map_err(callback)?;
                self.scratch.insert(format!("{id}.text"), Value::Str(text));
            }
        }
        Ok(Step::Follow(NEXT.to_string()))
    }
}

fn assign(op: AssignOp, current: Option<Value>, operand: Option<Value>) -> Result<Value, String> {
    let current = current.ok_or("variable is not declared")?;
    match (op, current, operand) {
        (AssignOp::Set, _, Some(v)) => Ok(v),
        (AssignOp::Clear, cur, _) => Ok(cur.cleared()),
        (AssignOp::Append, Value::List(mut items), Some(v)) => {
            items.push(v.render());
            Ok(Value::List(items))
        }
        (AssignOp::Add, Value::Num(a), Some(Value::Num(b))) => Ok(Value::Num(a + b)),
        (op, cur, v) => Err(format!(
            "cannot {op:?} {} onto a {}",
            v.as_ref().map_or("nothing", Value::type_name),
            cur.type_name()
        )
        .to_lowercase()),
    }
}

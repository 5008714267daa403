//! Scope extraction and plan authoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::provider::{ChatMessage, Provider, ProviderReply, PLANNER};
use super::visualizer::Candidate;
use super::AgentError;
use crate::canon::fmt_num;
use crate::chatflow::workflow::template_parts;
use crate::dcc::{is_valid_name, parse_command, ParamValue};

const SYSTEM: &str = "You are the Planner. Turn the selected candidates into a procedural plan for the DCC \
                      console. Reply with JSON {\"steps\": [{\"description\", \"console_cmds\", \"expected_check\"}]}. \
                      Commands may use {{param}} placeholders, filled from each candidate.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Scope {
    pub min: f64,
    pub max: f64,
}

impl From<[f64; 2]> for Scope {
    fn from([min, max]: [f64; 2]) -> Self {
        Scope { min, max }
    }
}

impl From<Scope> for [f64; 2] {
    fn from(s: Scope) -> Self {
        [s.min, s.max]
    }
}

impl Scope {
    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// After the step's commands run, `query <query>` must mention `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedCheck {
    pub query: String,
    pub contains: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStep {
    pub description: String,
    pub console_cmds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_check: Option<ExpectedCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProceduralSpec {
    pub numeric_scopes: BTreeMap<String, Scope>,
    pub categorical_scopes: BTreeMap<String, BTreeSet<String>>,
    pub plan: Vec<PlanStep>,
}

impl ProceduralSpec {
    /// True when every candidate parameter falls inside its scope.
    pub fn contains(&self, c: &Candidate) -> bool {
        c.params.iter().all(|(k, v)| match v {
            ParamValue::Num(x) => self.numeric_scopes.get(k).is_some_and(|s| s.contains(*x)),
            ParamValue::Text(t) => self.categorical_scopes.get(k).is_some_and(|s| s.contains(t)),
        })
    }

    /// The same spec with `{{param}}` placeholders in every command filled
    /// from `candidate`.
    pub fn instantiate(&self, candidate: &Candidate) -> Result<ProceduralSpec, AgentError> {
        let plan = self
            .plan
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let console_cmds = step
                    .console_cmds
                    .iter()
                    .map(|cmd| fill(cmd, &candidate.params).map_err(|message| AgentError::PlanStep { step: i, message }))
                    .collect::<Result<_, _>>()?;
                Ok(PlanStep {
                    console_cmds,
                    ..step.clone()
                })
            })
            .collect::<Result<_, AgentError>>()?;
        Ok(ProceduralSpec { plan, ..self.clone() })
    }
}

fn fill(cmd: &str, params: &BTreeMap<String, ParamValue>) -> Result<String, String> {
    let mut out = String::new();
    for part in template_parts(cmd) {
        match part {
            Ok(text) => out.push_str(text),
            Err(name) => match params.get(name) {
                Some(ParamValue::Num(n)) => out.push_str(&fmt_num(*n)),
                Some(ParamValue::Text(t)) => out.push_str(t),
                None => return Err(format!("placeholder '{{{{{name}}}}}' names no candidate parameter")),
            },
        }
    }
    Ok(out)
}

type Scopes = (BTreeMap<String, Scope>, BTreeMap<String, BTreeSet<String>>);

/// Numeric scope = [min, max] over the selection; categorical scope = the set
/// of observed values.
pub fn extract_scopes(selected: &[Candidate]) -> Result<Scopes, AgentError> {
    let first = selected.first().ok_or(AgentError::EmptySelection)?;
    let names: BTreeSet<&String> = first.params.keys().collect();
    for c in selected {
        if c.params.keys().collect::<BTreeSet<_>>() != names {
            return Err(AgentError::HeterogeneousParams { candidate: c.id.clone() });
        }
    }
    let mut numeric = BTreeMap::new();
    let mut categorical = BTreeMap::new();
    for name in names {
        let values: Vec<&ParamValue> = selected.iter().map(|c| &c.params[name]).collect();
        if let Some(nums) = values.iter().map(|v| v.as_num()).collect::<Option<Vec<f64>>>() {
            let min = nums.iter().copied().fold(f64::INFINITY, f64::min);
            let max = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            numeric.insert(name.clone(), Scope { min, max });
        } else if let Some(texts) = values
            .iter()
            .map(|v| match v {
                ParamValue::Text(t) => Some(t.clone()),
                ParamValue::Num(_) => None,
            })
            .collect::<Option<BTreeSet<String>>>()
        {
            categorical.insert(name.clone(), texts);
        } else {
            return Err(AgentError::MixedParamTypes { param: name.clone() });
        }
    }
    Ok((numeric, categorical))
}

pub fn planner_context(selected: &[Candidate], scopes: &Scopes, knowledge: &str) -> Vec<ChatMessage> {
    let mut msg = String::from("Selected candidates:");
    for c in selected {
        let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = write!(msg, "\n- {}: {} [{}]", c.id, c.descriptor, params.join(", "));
    }
    for (k, s) in &scopes.0 {
        let _ = write!(msg, "\nScope {k}: [{}, {}]", fmt_num(s.min), fmt_num(s.max));
    }
    for (k, s) in &scopes.1 {
        let _ = write!(msg, "\nScope {k}: {s:?}");
    }
    if !knowledge.trim().is_empty() {
        let _ = write!(msg, "\nReference knowledge:\n{}", knowledge.trim());
    }
    vec![ChatMessage::system(SYSTEM), ChatMessage::user(msg)]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    steps: Vec<PlanStep>,
}

/// Parses a planner reply, tolerating a fenced code block around the JSON.
pub fn parse_plan(text: &str) -> Result<Vec<PlanStep>, AgentError> {
    let body = text.trim();
    let body = body
        .strip_prefix("```json")
        .or_else(|| body.strip_prefix("```"))
        .and_then(|b| b.strip_suffix("```"))
        .unwrap_or(body);
    let doc: PlanDoc = serde_json::from_str(body).map_err(|e| AgentError::PlanParse(e.to_string()))?;
    Ok(doc.steps)
}

/// Checks that every step is well formed and that every command parses
/// for each candidate once placeholders are filled.
pub fn validate_plan(plan: &[PlanStep], candidates: &[Candidate]) -> Result<(), AgentError> {
    for (i, step) in plan.iter().enumerate() {
        let err = |message: String| AgentError::PlanStep { step: i, message };
        if step.console_cmds.is_empty() {
            return Err(err("step has no console commands".into()));
        }
        if let Some(check) = &step.expected_check {
            if !is_valid_name(&check.query) {
                return Err(err(format!("expected_check queries invalid object name '{}'", check.query)));
            }
        }
        for c in candidates {
            for cmd in &step.console_cmds {
                let line = fill(cmd, &c.params).map_err(err)?;
                if line.contains('\n') {
                    return Err(err(format!("command '{cmd}' spans several lines")));
                }
                parse_command(&line).map_err(|d| err(format!("'{line}': {d}")))?;
            }
        }
    }
    Ok(())
}

/// Extracts scopes from the selection and asks the Planner for a plan.
pub fn plan_from_selection(
    provider: &dyn Provider,
    selected: &[Candidate],
    knowledge: &str,
) -> Result<ProceduralSpec, AgentError> {
    let scopes = extract_scopes(selected)?;
    let ctx = planner_context(selected, &scopes, knowledge);
    let text = match provider.complete(PLANNER, &ctx)? {
        ProviderReply::Text(t) => t,
        other => {
            return Err(AgentError::UnexpectedReply {
                role: PLANNER.into(),
                expected: "text",
                got: other.kind(),
            })
        }
    };
    let plan = parse_plan(&text)?;
    validate_plan(&plan, selected)?;
    let (numeric_scopes, categorical_scopes) = scopes;
    Ok(ProceduralSpec {
        numeric_scopes,
        categorical_scopes,
        plan,
    })
}

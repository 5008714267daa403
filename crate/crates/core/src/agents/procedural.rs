//! A provider that needs no fixture: replies are derived from a hash of the
//! context, so equal contexts always get equal replies.

use std::collections::BTreeMap;

use serde_json::json;

use super::provider::{context_hash, CandidateDraft, ChatMessage, MessageRole, Provider, ProviderError, ProviderReply};
use super::provider::{PLANNER, VISUALIZER};
use crate::canon::fmt_num;
use crate::dcc::ParamValue;
use crate::hash::fnv1a64;

const DIMENSIONS: [&str; 3] = ["width", "depth", "height"];

#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralProvider;

fn last_user(context: &[ChatMessage]) -> &str {
    context
        .iter()
        .rev()
        .find(|m| m.role == MessageRole::User)
        .map_or("", |m| m.content.as_str())
}

/// A value in [0.5, 3.0] on a 0.1 grid.
fn dimension(seed: &str, slot: usize, name: &str) -> f64 {
    let h = fnv1a64(format!("{seed}/{slot}/{name}").as_bytes());
    (5 + h % 26) as f64 / 10.0
}

fn candidates(context: &[ChatMessage]) -> ProviderReply {
    let n = last_user(context)
        .lines()
        .find_map(|l| l.strip_prefix("Produce ")?.split_whitespace().next()?.parse::<usize>().ok())
        .unwrap_or(1);
    let seed = context_hash(context);
    ProviderReply::Candidates(
        (0..n)
            .map(|slot| {
                let params: BTreeMap<String, ParamValue> = DIMENSIONS
                    .iter()
                    .map(|d| (d.to_string(), ParamValue::Num(dimension(&seed, slot, d))))
                    .collect();
                let descriptor = DIMENSIONS
                    .iter()
                    .map(|d| format!("{d} {}", params[*d]))
                    .collect::<Vec<_>>()
                    .join(", ");
                CandidateDraft {
                    params,
                    descriptor: format!("block, {descriptor}"),
                }
            })
            .collect(),
    )
}

/// A generic plan: a body cube sized from whichever dimensions the
/// selection has scopes for, resting on a floor.
fn plan(context: &[ChatMessage]) -> ProviderReply {
    let scoped: Vec<&str> = DIMENSIONS
        .iter()
        .copied()
        .filter(|d| last_user(context).contains(&format!("\nScope {d}: [")))
        .collect();
    let sizes: String = scoped.iter().map(|d| format!(" {d}={{{{{d}}}}}")).collect();
    let rest = if scoped.contains(&"height") {
        "link body.y = body.height / 2"
    } else {
        "set body.y 0.5"
    };
    let steps = json!([
        {
            "description": "Block out the main body",
            "console_cmds": [format!("add cube body{sizes}")],
            "expected_check": {"query": "body", "contains": "kind=cube"}
        },
        {"description": "Add a floor", "console_cmds": ["add plane floor width=4 depth=4"]},
        {"description": "Rest the body on the floor", "console_cmds": [rest]}
    ]);
    ProviderReply::Text(json!({ "steps": steps }).to_string())
}

impl Provider for ProceduralProvider {
    fn complete(&self, role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        let hash = context_hash(context);
        Ok(match role {
            VISUALIZER => candidates(context),
            PLANNER if last_user(context).starts_with("Selected candidates:") => plan(context),
            "builder" => {
                let h = fnv1a64(hash.as_bytes());
                ProviderReply::Text(format!(
                    "add cube part_{} height={}",
                    &hash[..8],
                    fmt_num((5 + h % 26) as f64 / 10.0)
                ))
            }
            "inspector" => ProviderReply::Text("pass".into()),
            "reviewer" => ProviderReply::Text("Planner".into()),
            _ => {
                let first = last_user(context).lines().next().unwrap_or("").trim();
                ProviderReply::Text(format!("{role}: {first}"))
            }
        })
    }
}

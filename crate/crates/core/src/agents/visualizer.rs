//! Candidate generation: structured stand-ins for pre-visualization images.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::provider::{ChatMessage, Provider, ProviderReply, VISUALIZER};
use super::AgentError;
use crate::dcc::{is_valid_param, render_thumbnail, Command, ObjectKind, ParamValue, Scene};

const SYSTEM: &str = "You are the Visualizer. Propose pre-visualization candidates as parameter sets with a \
                      short descriptor each. Reply with exactly the number of candidates requested.";

/// Appended to the feedback message when the user flags low variation.
pub const MORE_DIVERSITY: &str = "Please introduce more diversity: the user finds the candidates too similar.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub params: BTreeMap<String, ParamValue>,
    pub descriptor: String,
    /// SVG document.
    pub thumbnail: String,
}

pub fn candidate_id(round: u32, slot: usize) -> String {
    format!("r{round}s{slot}")
}

/// The scene a candidate thumbnail is drawn from: a 4-unit ground line for
/// scale plus a cube carrying the candidate's parameters. Parameters the
/// cube rejects (for instance a non-positive scale) are skipped.
pub fn preview_scene(params: &BTreeMap<String, ParamValue>) -> Scene {
    let mut scene = Scene::new();
    let ground = Command::Add {
        kind: ObjectKind::Plane,
        name: "ground".into(),
        params: BTreeMap::from([("width".to_string(), ParamValue::Num(4.0))]),
    };
    scene.apply_command(&ground).expect("static preview object");
    let preview = |params: BTreeMap<String, ParamValue>| Command::Add {
        kind: ObjectKind::Cube,
        name: "preview".into(),
        params,
    };
    if scene.apply_command(&preview(params.clone())).is_err() {
        let mut accepted = BTreeMap::new();
        for (k, v) in params {
            let mut trial = accepted.clone();
            trial.insert(k.clone(), v.clone());
            if Scene::new().apply_command(&preview(trial)).is_ok() {
                accepted.insert(k.clone(), v.clone());
            }
        }
        scene.apply_command(&preview(accepted)).expect("accepted params apply");
    }
    scene
}

pub fn make_candidate(id: String, params: BTreeMap<String, ParamValue>, descriptor: String) -> Candidate {
    let thumbnail = render_thumbnail(&preview_scene(&params));
    Candidate {
        id,
        params,
        descriptor,
        thumbnail,
    }
}

/// What the previous round produced and what the user said about it.
#[derive(Debug, Clone, Copy)]
pub struct Prior<'a> {
    /// Number of the round being generated (2 or more).
    pub round: u32,
    pub current: &'a [Candidate],
    pub selected_ids: &'a BTreeSet<String>,
    pub rejection_reasons: &'a BTreeMap<String, String>,
    pub more_diversity: bool,
    /// Feedback messages of earlier rounds, oldest first.
    pub earlier_feedback: &'a [String],
}

pub fn request_message(prompt: &str, n: usize) -> String {
    format!("Request: {prompt}\nProduce {n} candidates.")
}

/// The user message describing one round's selection.
pub fn feedback_message(prior: &Prior<'_>) -> String {
    let mut msg = format!("Round {} feedback.", prior.round - 1);
    let kept: Vec<&Candidate> = prior.current.iter().filter(|c| prior.selected_ids.contains(&c.id)).collect();
    let rejected: Vec<&Candidate> = prior.current.iter().filter(|c| !prior.selected_ids.contains(&c.id)).collect();
    for c in &kept {
        let _ = write!(msg, "\nKept {}: {}", c.id, c.descriptor);
    }
    for c in &rejected {
        let reason = prior.rejection_reasons.get(&c.id).map_or("no reason given", String::as_str);
        let _ = write!(msg, "\nRejected {}: {} (reason: {reason})", c.id, c.descriptor);
    }
    let _ = write!(msg, "\nProduce {} replacement candidates.", rejected.len());
    if prior.more_diversity {
        msg.push('\n');
        msg.push_str(MORE_DIVERSITY);
    }
    msg
}

/// The provider context for a round.
pub fn visualizer_context(prompt: &str, n: usize, prior: Option<&Prior<'_>>) -> Vec<ChatMessage> {
    let mut ctx = vec![ChatMessage::system(SYSTEM), ChatMessage::user(request_message(prompt, n))];
    if let Some(p) = prior {
        ctx.extend(p.earlier_feedback.iter().map(ChatMessage::user));
        ctx.push(ChatMessage::user(feedback_message(p)));
    }
    ctx
}

/// Produces a round of `n` candidates. With a prior round, selected
/// candidates are carried over verbatim in their slots and only the rejected
/// slots are regenerated.
pub fn visualize_candidates(
    provider: &dyn Provider,
    prompt: &str,
    n: usize,
    prior: Option<&Prior<'_>>,
) -> Result<Vec<Candidate>, AgentError> {
    if n == 0 {
        return Err(AgentError::BadCount);
    }
    let round = prior.map_or(1, |p| p.round);
    let keep: Vec<Option<&Candidate>> = match prior {
        None => vec![None; n],
        Some(p) => {
            if p.current.len() != n {
                return Err(AgentError::CountMismatch {
                    expected: n,
                    got: p.current.len(),
                });
            }
            p.current.iter().map(|c| p.selected_ids.contains(&c.id).then_some(c)).collect()
        }
    };
    let wanted = keep.iter().filter(|k| k.is_none()).count();
    let mut drafts = if wanted == 0 {
        Vec::new()
    } else {
        let ctx = visualizer_context(prompt, n, prior);
        match provider.complete(VISUALIZER, &ctx)? {
            ProviderReply::Candidates(d) => d,
            other => {
                return Err(AgentError::UnexpectedReply {
                    role: VISUALIZER.into(),
                    expected: "candidate batch",
                    got: other.kind(),
                })
            }
        }
    };
    if drafts.len() != wanted {
        return Err(AgentError::CountMismatch {
            expected: wanted,
            got: drafts.len(),
        });
    }
    for d in &drafts {
        check_draft_params(&d.params)?;
    }
    drafts.reverse();
    Ok(keep
        .into_iter()
        .enumerate()
        .map(|(i, kept)| match kept {
            Some(c) => c.clone(),
            None => {
                let d = drafts.pop().expect("counted above");
                make_candidate(candidate_id(round, i + 1), d.params, d.descriptor)
            }
        })
        .collect())
}

fn check_draft_params(params: &BTreeMap<String, ParamValue>) -> Result<(), AgentError> {
    if params.is_empty() {
        return Err(AgentError::InvalidCandidate("candidate has no parameters".into()));
    }
    for (k, v) in params {
        if !is_valid_param(k) {
            return Err(AgentError::InvalidCandidate(format!("bad parameter name '{k}'")));
        }
        if matches!(v, ParamValue::Num(x) if !x.is_finite()) {
            return Err(AgentError::InvalidCandidate(format!("parameter '{k}' is not finite")));
        }
    }
    Ok(())
}

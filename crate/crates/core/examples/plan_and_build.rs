//! Plans and builds accepted candidates on fresh simulator scenes, then runs
//! a hand-written plan whose broken step is repaired by an advisor.
//!
//! cargo run -p dccflow --example plan_and_build

use std::collections::BTreeMap;

use dccflow::agents::{
    manage_execute, ChatMessage, PlanStep, ProceduralProvider, ProceduralSpec, Provider, ProviderError,
    ProviderReply, RetryBudget,
};
use dccflow::dcc::server::{console_args, spawn_embedded};
use dccflow::feedback::{finalize, start_loop, submit_selection, EmbeddedScenes, Finalizer, Selection};

/// Answers every repair request with a fixed command.
struct Advisor(&'static str);

impl Provider for Advisor {
    fn complete(&self, _role: &str, context: &[ChatMessage]) -> Result<ProviderReply, ProviderError> {
        let last = context.last().map_or("", |m| m.content.as_str());
        println!("  advisor saw: {}", last.lines().last().unwrap_or(""));
        Ok(ProviderReply::ToolCall {
            tool: "run_cmd_on_default_console".into(),
            args: console_args(self.0),
        })
    }
}

fn main() {
    let provider = ProceduralProvider;
    let state = start_loop("a garden shed", 2, &provider).unwrap();
    let all = Selection::of(state.current.iter().map(|c| c.id.clone()));
    let state = submit_selection(&state, all, &provider).unwrap();

    let finalizer = Finalizer {
        planner: &provider,
        advisor: Some(&provider),
        knowledge: "",
        budget: RetryBudget::default(),
    };
    let (_, result) = finalize(&state, &finalizer, &mut EmbeddedScenes, &mut |id, s| {
        println!("{id} step {} '{}': {:?} after {} of {} attempts", s.index, s.description, s.outcome, s.attempts, s.budget);
    })
    .unwrap();
    for (k, s) in &result.spec.numeric_scopes {
        println!("scope {k}: [{}, {}]", s.min, s.max);
    }
    for b in &result.builds {
        println!("{}: complete={} digest={}", b.candidate_id, b.complete(), b.report.snapshot_digest);
    }

    println!("\nrepair run:");
    let spec = ProceduralSpec {
        numeric_scopes: BTreeMap::new(),
        categorical_scopes: BTreeMap::new(),
        plan: vec![
            PlanStep {
                description: "Lay the floor".into(),
                console_cmds: vec!["add plane floor width=3 depth=2".into()],
                expected_check: None,
            },
            PlanStep {
                description: "Stand the walls on the floor".into(),
                console_cmds: vec!["add cube walls width=3 depth=2 height=2".into(), "link walls.z = flor.z".into()],
                expected_check: None,
            },
        ],
    };
    let (mut client, _) = spawn_embedded();
    client.initialize().unwrap();
    let advisor = Advisor("add cube walls width=3 depth=2 height=2\nlink walls.z = floor.z");
    let report = manage_execute(&spec, &mut client, RetryBudget::new(1, 1, 4).unwrap(), Some(&advisor), &mut |s| {
        println!("step {} '{}': {:?}, errors {:?}", s.index, s.description, s.outcome, s.errors);
    })
    .unwrap();
    println!("attempts per step: {:?}", report.attempts());
}

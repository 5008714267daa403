//! Random workflows run through the engine and through a small reference
//! interpreter written directly against the document JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as Json};

use dccflow::chatflow::{load_workflow, run_turn, ConversationState, TurnError, TurnServices, Value, DEFAULT_VISIT_BUDGET};

use super::{ensure, Outcome};

const STAGES: [&str; 5] = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon"];
const QUERIES: [&str; 6] = ["hello", "Beta", "FAIL now", "  Alpha ", "3", "Gamma"];
const WORDS: [&str; 5] = ["red", "tall", "Beta", "x y", "0"];

// ---------------------------------------------------------------- services

fn svc_retrieve(q: &str, k: usize) -> Result<Vec<String>, String> {
    if q.contains("FAIL") {
        return Err("index offline".into());
    }
    Ok((0..k).map(|i| format!("doc{i}[{}]", q.len())).collect())
}

fn svc_agent(role: &str, p: &str) -> Result<String, String> {
    if p.contains("FAIL") {
        return Err("model refused".into());
    }
    Ok(format!("{role}:{}", p.len() % 7))
}

fn svc_tool(tool: &str, args: &BTreeMap<String, String>) -> String {
    let body: Vec<String> = args.iter().map(|(k, v)| format!("{k}={}", v.len())).collect();
    format!("{tool}({})", body.join(";"))
}

struct Mock;

impl TurnServices for Mock {
    fn retrieve(&mut self, q: &str, k: usize) -> Result<Vec<String>, String> {
        svc_retrieve(q, k)
    }
    fn agent(&mut self, role: &str, p: &str) -> Result<String, String> {
        svc_agent(role, p)
    }
    fn tool(&mut self, tool: &str, args: &BTreeMap<String, String>) -> Result<String, String> {
        Ok(svc_tool(tool, args))
    }
}

// --------------------------------------------------------------- generator

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Assigner,
    Function,
    Branch,
    Agent,
    Tool,
    Retrieval,
}

struct Gen {
    rng: StdRng,
    stages: Vec<&'static str>,
    nodes: serde_json::Map<String, Json>,
    edges: Vec<Json>,
    kinds: Vec<(String, Kind)>,
    answers: usize,
}

impl Gen {
    fn earlier(&self, kind: Kind) -> Vec<String> {
        self.kinds.iter().filter(|(_, k)| *k == kind).map(|(id, _)| id.clone()).collect()
    }

    fn pick_ref(&mut self) -> String {
        let mut refs: Vec<String> = [
            "sys.query",
            "conv.stage",
            "conv.count",
            "conv.note",
            "conv.log",
            "conv.stage_num",
            "conv.dirty_bit",
            "conv.remaining_inspection_count",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for f in self.earlier(Kind::Function) {
            for out in ["stage", "stage_num", "dirty_bit", "remaining_inspection_count", "at_budget"] {
                refs.push(format!("{f}.{out}"));
            }
        }
        for a in self.earlier(Kind::Agent).into_iter().chain(self.earlier(Kind::Tool)) {
            refs.push(format!("{a}.text"));
        }
        for r in self.earlier(Kind::Retrieval) {
            refs.push(format!("{r}.result"));
        }
        refs.choose(&mut self.rng).unwrap().clone()
    }

    fn template(&mut self) -> String {
        let parts = self.rng.gen_range(1..=3);
        let mut t = String::new();
        for i in 0..parts {
            if i > 0 {
                t.push(' ');
            }
            if self.rng.gen_bool(0.6) {
                t.push_str(&format!("{{{{{}}}}}", self.pick_ref()));
            } else {
                t.push_str(WORDS.choose(&mut self.rng).unwrap());
            }
        }
        t
    }

    fn assignments(&mut self) -> Vec<Json> {
        let mut out = Vec::new();
        for _ in 0..self.rng.gen_range(1..=3) {
            let funcs = self.earlier(Kind::Function);
            match self.rng.gen_range(0..12) {
                0 => out.push(json!({"variable": "count", "op": "add", "value": self.rng.gen_range(-2..=3)})),
                1 => out.push(json!({"variable": "count", "value": self.rng.gen_range(0..=5)})),
                2 => out.push(json!({"variable": "count", "op": "clear"})),
                3 => out.push(json!({"variable": "note", "value": *WORDS.choose(&mut self.rng).unwrap()})),
                4 => out.push(json!({"variable": "note", "from": self.pick_ref()})),
                5 => out.push(json!({"variable": "log", "op": "append", "from": self.pick_ref()})),
                6 => out.push(json!({"variable": "log", "op": "append", "value": *WORDS.choose(&mut self.rng).unwrap()})),
                7 => out.push(json!({"variable": "count", "from": "conv.stage_num"})),
                8 if !funcs.is_empty() => {
                    let f = funcs.choose(&mut self.rng).unwrap();
                    out.push(json!({"variable": "stage", "from": format!("{f}.stage")}));
                    out.push(json!({"variable": "stage_num", "from": format!("{f}.stage_num")}));
                    out.push(json!({"variable": "dirty_bit", "from": format!("{f}.dirty_bit")}));
                }
                9 => {
                    let var = *["dirty_bit", "enable_increment"].choose(&mut self.rng).unwrap();
                    out.push(json!({"variable": var, "value": self.rng.gen_range(0..=1)}));
                }
                10 if !funcs.is_empty() => {
                    let f = funcs.choose(&mut self.rng).unwrap();
                    out.push(json!({"variable": "remaining_inspection_count", "from": format!("{f}.remaining_inspection_count")}));
                }
                11 => out.push(json!({"variable": "note", "op": "clear"})),
                _ => out.push(json!({"variable": "count", "op": "add", "from": "conv.count"})),
            }
        }
        out
    }

    fn function(&mut self) -> Json {
        match self.rng.gen_range(0..5) {
            0 | 1 => json!({"kind": "function", "function": "to_next_stage"}),
            2 => {
                let stage = match self.rng.gen_range(0..3) {
                    0 => "{{sys.query}}".to_string(),
                    1 => "{{conv.note}}".to_string(),
                    _ => self.stages.choose(&mut self.rng).unwrap().to_string(),
                };
                json!({"kind": "function", "function": "set_stage", "args": {"stage": stage}})
            }
            3 => json!({"kind": "function", "function": "decrement_inspection"}),
            _ => json!({"kind": "function", "function": "reset_inspection"}),
        }
    }

    fn branch(&mut self) -> (Json, Vec<String>) {
        let funcs = self.earlier(Kind::Function);
        let (on, mut cases, dispatch): (String, Vec<String>, bool) = match self.rng.gen_range(0..6) {
            0 => ("conv.stage".into(), self.stages.iter().map(|s| s.to_string()).collect(), self.rng.gen_bool(0.5)),
            1 => ("sys.query".into(), vec!["hello".into(), "Beta".into(), "3".into()], false),
            2 => ("sys.query".into(), self.stages.iter().map(|s| s.to_string()).collect(), true),
            3 => ("conv.count".into(), (0..4).map(|i| i.to_string()).collect(), false),
            4 if !funcs.is_empty() => (format!("{}.at_budget", funcs.choose(&mut self.rng).unwrap()), vec!["true".into()], false),
            _ => ("conv.dirty_bit".into(), vec![self.rng.gen_range(0..=1).to_string()], false),
        };
        cases.shuffle(&mut self.rng);
        let keep = self.rng.gen_range(1..=cases.len());
        cases.truncate(keep);
        (json!({"kind": "branch", "on": on, "cases": cases, "stage_dispatch": dispatch}), cases)
    }

    fn new_answer(&mut self) -> String {
        let id = format!("ans{}", self.answers);
        self.answers += 1;
        let text = self.template();
        self.nodes.insert(id.clone(), json!({"kind": "answer", "text": text}));
        id
    }

    fn edge(&mut self, from: &str, label: &str, to: &str) {
        self.edges.push(json!({"from": from, "label": label, "to": to}));
    }
}

pub fn random_workflow(seed: u64) -> Json {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_stages = rng.gen_range(2..=5);
    let mut g = Gen {
        rng,
        stages: STAGES[..n_stages].to_vec(),
        nodes: serde_json::Map::new(),
        edges: Vec::new(),
        kinds: Vec::new(),
        answers: 0,
    };
    let mut vars = serde_json::Map::new();
    vars.insert("stages".into(), json!(g.stages));
    vars.insert("count".into(), json!(g.rng.gen_range(0..=3)));
    vars.insert("note".into(), json!(""));
    vars.insert("log".into(), json!([]));
    if g.rng.gen_bool(0.5) {
        vars.insert("dirty_bit".into(), json!(g.rng.gen_range(0..=1)));
    }
    if g.rng.gen_bool(0.3) {
        vars.insert("enable_increment".into(), json!(g.rng.gen_range(0..=1)));
    }
    if g.rng.gen_bool(0.6) {
        vars.insert("max_inspection_count".into(), json!(g.rng.gen_range(0..=3)));
    }

    let len = g.rng.gen_range(2..=10);
    let chain: Vec<String> = (1..=len).map(|i| format!("c{i}")).collect();
    g.nodes.insert("start".into(), json!({"kind": "start"}));
    g.edge("start", "next", "c1");
    let end = g.new_answer();
    for (i, id) in chain.iter().enumerate() {
        let next = chain.get(i + 1).cloned().unwrap_or_else(|| end.clone());
        let kind = *[Kind::Assigner, Kind::Assigner, Kind::Function, Kind::Branch, Kind::Agent, Kind::Tool, Kind::Retrieval]
            .choose(&mut g.rng)
            .unwrap();
        let node = match kind {
            Kind::Assigner => json!({"kind": "assigner", "assignments": g.assignments()}),
            Kind::Function => g.function(),
            Kind::Agent => {
                let role = *["scout", "critic"].choose(&mut g.rng).unwrap();
                json!({"kind": "agent_call", "role": role, "prompt": g.template()})
            }
            Kind::Tool => json!({"kind": "tool_call", "tool": "echo", "args": {"a": g.template(), "b": g.template()}}),
            Kind::Retrieval => json!({"kind": "retrieval", "query": g.template(), "k": g.rng.gen_range(1..=3)}),
            Kind::Branch => {
                let (node, cases) = g.branch();
                g.edge(id, "default", &next);
                for c in cases {
                    let target = match g.rng.gen_range(0..10) {
                        0 => chain[g.rng.gen_range(0..=i)].clone(),
                        1..=4 => g.new_answer(),
                        _ if i + 2 < chain.len() => chain[g.rng.gen_range(i + 2..chain.len())].clone(),
                        _ => end.clone(),
                    };
                    g.edge(id, &c, &target);
                }
                node
            }
        };
        if kind != Kind::Branch {
            g.edge(id, "next", &next);
        }
        g.nodes.insert(id.clone(), node);
        g.kinds.push((id.clone(), kind));
    }
    json!({
        "name": format!("random-{seed}"),
        "start": "start",
        "conversation_variables": vars,
        "nodes": g.nodes,
        "edges": g.edges,
    })
}

// ------------------------------------------------------ reference interpreter

#[derive(Debug, Clone, PartialEq)]
pub enum V {
    N(f64),
    S(String),
    L(Vec<String>),
}

impl V {
    fn text(&self) -> String {
        match self {
            V::N(n) => format!("{}", *n as i64),
            V::S(s) => s.clone(),
            V::L(items) => items.join("\n"),
        }
    }

    fn from_json(j: &Json) -> V {
        match j {
            Json::Number(n) => V::N(n.as_f64().unwrap()),
            Json::String(s) => V::S(s.clone()),
            Json::Array(a) => V::L(a.iter().map(|x| x.as_str().unwrap().to_string()).collect()),
            other => panic!("unexpected literal {other}"),
        }
    }

    fn kind(&self) -> u8 {
        match self {
            V::N(_) => 0,
            V::S(_) => 1,
            V::L(_) => 2,
        }
    }
}

pub type Vars = BTreeMap<String, V>;

/// Error classes shared by both interpreters.
pub fn class(e: &TurnError) -> &'static str {
    match e {
        TurnError::VisitBudget(_) => "budget",
        TurnError::Callback { .. } => "callback",
        TurnError::NotAStage { .. } => "not_a_stage",
        TurnError::Stage { .. } => "stage",
        TurnError::State { .. } => "state",
        TurnError::MissingValue { .. } => "missing",
    }
}

pub fn initial_vars(doc: &Json) -> Vars {
    let decl = doc["conversation_variables"].as_object().unwrap();
    let mut vars: Vars = decl.iter().map(|(k, v)| (k.clone(), V::from_json(v))).collect();
    let stages = match &vars["stages"] {
        V::L(s) => s.clone(),
        _ => unreachable!(),
    };
    vars.entry("dirty_bit".into()).or_insert(V::N(1.0));
    vars.entry("enable_increment".into()).or_insert(V::N(1.0));
    vars.entry("max_inspection_count".into()).or_insert(V::N(0.0));
    let max = vars["max_inspection_count"].clone();
    vars.insert("remaining_inspection_count".into(), max);
    vars.insert("stage_num".into(), V::N(0.0));
    vars.insert("stage".into(), V::S(stages[0].clone()));
    vars
}

pub fn vars_of(state: &ConversationState) -> Vars {
    state
        .var_names()
        .map(|n| {
            let v = match state.get_var(n).unwrap() {
                Value::Num(x) => V::N(x),
                Value::Str(s) => V::S(s),
                Value::List(l) => V::L(l),
            };
            (n.to_string(), v)
        })
        .collect()
}

fn num(v: &V) -> Option<f64> {
    match v {
        V::N(n) => Some(*n),
        _ => None,
    }
}

fn count_ok(v: &V) -> Result<f64, ()> {
    match v {
        V::N(n) if *n >= 0.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => Ok(*n),
        _ => Err(()),
    }
}

fn set(vars: &mut Vars, name: &str, v: V) -> Result<(), ()> {
    let cur = vars.get(name).ok_or(())?;
    match name {
        "stage" | "stages" | "dirty_bit" | "enable_increment" | "stage_num" | "max_inspection_count"
        | "remaining_inspection_count" => {
            if cur.kind() != v.kind() {
                return Err(());
            }
            match name {
                "stage" => {}
                "stages" if matches!(&v, V::L(l) if l.is_empty()) => return Err(()),
                "stages" => {}
                "dirty_bit" | "enable_increment" if count_ok(&v)? > 1.0 => return Err(()),
                _ => {
                    count_ok(&v)?;
                }
            }
        }
        _ if cur.kind() != v.kind() => return Err(()),
        _ => {}
    }
    vars.insert(name.to_string(), v);
    Ok(())
}

fn stages_of(vars: &Vars) -> Vec<String> {
    match &vars["stages"] {
        V::L(s) => s.clone(),
        _ => unreachable!(),
    }
}

fn valid(vars: &Vars) -> bool {
    let stages = stages_of(vars);
    let i = num(&vars["stage_num"]).unwrap() as usize;
    let rem = num(&vars["remaining_inspection_count"]).unwrap();
    let max = num(&vars["max_inspection_count"]).unwrap();
    !stages.is_empty() && i < stages.len() && vars["stage"] == V::S(stages[i].clone()) && rem <= max
}

struct RefTurn<'a> {
    vars: Vars,
    scratch: BTreeMap<String, V>,
    query: &'a str,
}

impl RefTurn<'_> {
    fn lookup(&self, r: &str) -> Result<V, &'static str> {
        let r = r.trim();
        if r == "sys.query" {
            return Ok(V::S(self.query.to_string()));
        }
        if let Some(name) = r.strip_prefix("conv.") {
            return self.vars.get(name).cloned().ok_or("missing");
        }
        self.scratch.get(r).cloned().ok_or("missing")
    }

    fn fill(&self, t: &str) -> Result<String, &'static str> {
        let mut out = String::new();
        let mut rest = t;
        while let Some(open) = rest.find("{{") {
            let Some(close) = rest[open + 2..].find("}}") else { break };
            out.push_str(&rest[..open]);
            out.push_str(&self.lookup(&rest[open + 2..open + 2 + close])?.text());
            rest = &rest[open + 4 + close..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

pub fn reference_turn(doc: &Json, vars: &Vars, query: &str) -> Result<(String, Vars, Vec<String>), &'static str> {
    let nodes = doc["nodes"].as_object().unwrap();
    let mut edges: BTreeMap<(String, String), String> = BTreeMap::new();
    for e in doc["edges"].as_array().unwrap() {
        let label = e.get("label").and_then(Json::as_str).unwrap_or("next");
        edges.insert((e["from"].as_str().unwrap().into(), label.into()), e["to"].as_str().unwrap().into());
    }
    let mut t = RefTurn {
        vars: vars.clone(),
        scratch: BTreeMap::new(),
        query,
    };
    let mut trace: Vec<String> = Vec::new();
    let mut cur = doc["start"].as_str().unwrap().to_string();
    loop {
        if trace.len() >= DEFAULT_VISIT_BUDGET {
            return Err("budget");
        }
        trace.push(cur.clone());
        let node = &nodes[&cur];
        let mut label = "next".to_string();
        match node["kind"].as_str().unwrap() {
            "start" => {}
            "answer" => {
                let text = t.fill(node["text"].as_str().unwrap())?;
                if !valid(&t.vars) {
                    return Err("state");
                }
                return Ok((text, t.vars, trace));
            }
            "assigner" => {
                for a in node["assignments"].as_array().unwrap() {
                    let var = a["variable"].as_str().unwrap();
                    let op = a.get("op").and_then(Json::as_str).unwrap_or("set");
                    let operand = match (a.get("value"), a.get("from")) {
                        (Some(v), _) => Some(V::from_json(v)),
                        (None, Some(r)) => Some(t.lookup(r.as_str().unwrap())?),
                        _ => None,
                    };
                    let current = t.vars.get(var).cloned().ok_or("state")?;
                    let new = match (op, current, operand) {
                        ("set", _, Some(v)) => v,
                        ("clear", V::N(_), _) => V::N(0.0),
                        ("clear", V::S(_), _) => V::S(String::new()),
                        ("clear", V::L(_), _) => V::L(vec![]),
                        ("append", V::L(mut l), Some(v)) => {
                            l.push(v.text());
                            V::L(l)
                        }
                        ("add", V::N(a), Some(V::N(b))) => V::N(a + b),
                        _ => return Err("state"),
                    };
                    set(&mut t.vars, var, new).map_err(|_| "state")?;
                }
            }
            "function" => {
                if !valid(&t.vars) {
                    return Err("state");
                }
                let stages = stages_of(&t.vars);
                let mut stage_num = num(&t.vars["stage_num"]).unwrap() as usize;
                let mut dirty = num(&t.vars["dirty_bit"]).unwrap();
                let inc = num(&t.vars["enable_increment"]).unwrap();
                let max = num(&t.vars["max_inspection_count"]).unwrap();
                let mut rem = num(&t.vars["remaining_inspection_count"]).unwrap();
                let mut at_budget = false;
                match node["function"].as_str().unwrap() {
                    "to_next_stage" => {
                        if dirty == 0.0 && inc == 1.0 {
                            if stage_num + 1 >= stages.len() {
                                return Err("stage");
                            }
                            stage_num += 1;
                        }
                        dirty = 0.0;
                    }
                    "set_stage" => {
                        let target = t.fill(node["args"]["stage"].as_str().unwrap())?;
                        stage_num = stages.iter().position(|s| s == target.trim()).ok_or("stage")?;
                        dirty = 1.0;
                    }
                    "decrement_inspection" => {
                        rem = (rem - 1.0).max(0.0);
                        at_budget = rem == 0.0;
                    }
                    _ => rem = max,
                }
                let id = &cur;
                t.scratch.insert(format!("{id}.stage"), V::S(stages[stage_num].clone()));
                t.scratch.insert(format!("{id}.stage_num"), V::N(stage_num as f64));
                t.scratch.insert(format!("{id}.dirty_bit"), V::N(dirty));
                t.scratch.insert(format!("{id}.remaining_inspection_count"), V::N(rem));
                t.scratch.insert(format!("{id}.at_budget"), V::S(at_budget.to_string()));
            }
            "branch" => {
                let value = t.lookup(node["on"].as_str().unwrap())?.text();
                let value = value.trim();
                let cases: Vec<&str> = node["cases"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
                label = if cases.contains(&value) {
                    value.to_string()
                } else if node["stage_dispatch"].as_bool().unwrap_or(false) && !stages_of(&t.vars).iter().any(|s| s == value) {
                    return Err("not_a_stage");
                } else {
                    "default".to_string()
                };
            }
            "retrieval" => {
                let q = t.fill(node["query"].as_str().unwrap())?;
                let k = node["k"].as_u64().unwrap() as usize;
                let hits = svc_retrieve(&q, k).map_err(|_| "callback")?;
                t.scratch.insert(format!("{cur}.result"), V::S(hits.join("\n\n")));
            }
            "agent_call" => {
                let p = t.fill(node["prompt"].as_str().unwrap())?;
                let text = svc_agent(node["role"].as_str().unwrap(), &p).map_err(|_| "callback")?;
                t.scratch.insert(format!("{cur}.text"), V::S(text));
            }
            "tool_call" => {
                let mut args = BTreeMap::new();
                for (k, v) in node["args"].as_object().unwrap() {
                    args.insert(k.clone(), t.fill(v.as_str().unwrap())?);
                }
                t.scratch.insert(format!("{cur}.text"), V::S(svc_tool(node["tool"].as_str().unwrap(), &args)));
            }
            other => panic!("unknown node kind {other}"),
        }
        cur = edges[&(cur.clone(), label)].clone();
    }
}

/// Variables an Assigner on `trace` may have written.
fn assigned_on(doc: &Json, trace: &[String]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for id in trace {
        let node = &doc["nodes"][id];
        if node["kind"] == "assigner" {
            for a in node["assignments"].as_array().unwrap() {
                out.insert(a["variable"].as_str().unwrap().to_string());
            }
        }
    }
    out
}

pub struct Stats {
    pub workflows: usize,
    pub turns: usize,
    pub ok_turns: usize,
    pub error_turns: usize,
    pub elapsed: Duration,
}

/// Runs one random workflow for three turns. Returns (answered, errored).
pub fn compare_seed(seed: u64) -> Result<(usize, usize), String> {
    let mut counts = (0, 0);
    let doc = random_workflow(seed);
    let wf = load_workflow(&doc.to_string()).map_err(|e| format!("seed {seed}: generated workflow rejected: {e}"))?;
    let mut state = wf.initial_state();
    ensure(vars_of(&state) == initial_vars(&doc), || format!("seed {seed}: initial state differs"))?;
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    for turn in 0..3 {
        let q = *QUERIES.choose(&mut rng).unwrap();
        let before = vars_of(&state);
        let got = run_turn(&wf, &state, q, &mut Mock);
        let want = reference_turn(&doc, &before, q);
        let ctx = || format!("seed {seed} turn {turn} query {q:?}");
        match (got, want) {
            (Ok(g), Ok((text, vars, trace))) => {
                counts.0 += 1;
                ensure(g.output_text == text, || format!("{}: output {:?} != {:?}", ctx(), g.output_text, text))?;
                let after = vars_of(&g.new_state);
                ensure(after == vars, || format!("{}: state {after:?} != {vars:?}", ctx()))?;
                ensure(g.trace == trace, || format!("{}: trace differs", ctx()))?;
                ensure(g.new_state.stage == g.new_state.stages[g.new_state.stage_num], || {
                    format!("{}: stage {:?} is not stages[{}]", ctx(), g.new_state.stage, g.new_state.stage_num)
                })?;
                let written = assigned_on(&doc, &g.trace);
                for (name, v) in &before {
                    ensure(written.contains(name) || after.get(name) == Some(v), || {
                        format!("{}: '{name}' changed without an assigner", ctx())
                    })?;
                }
                ensure(after.len() == before.len(), || format!("{}: variable set changed", ctx()))?;
                state = g.new_state;
            }
            (Err(e), Err(c)) => {
                counts.1 += 1;
                ensure(class(&e) == c, || format!("{}: engine error {e} vs reference {c}", ctx()))?;
            }
            (g, w) => return Err(format!("{}: engine {:?} vs reference {:?}", ctx(), g.map(|r| r.output_text), w.map(|r| r.0))),
        }
    }
    Ok(counts)
}

/// Runs `count` random workflows. Fails on the first disagreement with the
/// reference interpreter or isolation breach.
pub fn compare(count: u64) -> Result<Stats, String> {
    let started = Instant::now();
    let mut stats = Stats {
        workflows: 0,
        turns: 0,
        ok_turns: 0,
        error_turns: 0,
        elapsed: Duration::ZERO,
    };
    for seed in 0..count {
        let (ok, err) = compare_seed(seed)?;
        stats.ok_turns += ok;
        stats.error_turns += err;
        stats.turns += ok + err;
        stats.workflows += 1;
    }
    stats.elapsed = started.elapsed();
    Ok(stats)
}

pub fn run() -> Outcome {
    let s = compare(200)?;
    ensure(s.elapsed < Duration::from_secs(10), || format!("took {:?}", s.elapsed))?;
    ensure(s.ok_turns > s.turns / 4, || format!("only {} of {} turns completed", s.ok_turns, s.turns))?;
    Ok(format!(
        "{} workflows, {} turns ({} answered, {} errors agreed), turn isolation held, {} ms",
        s.workflows,
        s.turns,
        s.ok_turns,
        s.error_turns,
        s.elapsed.as_millis()
    ))
}

//! Planner scopes against a hand-rolled min/max, and the retry budget
//! formula.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dccflow::agents::{
    compute_retry_budget, extract_scopes, make_candidate, plan_from_selection, Candidate, ProceduralProvider,
    RetryBudget,
};
use dccflow::dcc::ParamValue;

use super::{ensure, Outcome};

const NUMERIC: [&str; 4] = ["width", "depth", "height", "z"];
const COLORS: [&str; 4] = ["#ff0000", "#00ff00", "#0000ff", "#ffffff"];

pub fn random_selection(rng: &mut StdRng) -> Vec<Candidate> {
    let count = rng.gen_range(1..=6);
    let with_color = rng.gen_bool(0.5);
    (0..count)
        .map(|i| {
            let mut params: BTreeMap<String, ParamValue> = NUMERIC
                .iter()
                .map(|p| (p.to_string(), ParamValue::Num(f64::from(rng.gen_range(1..=400)) / 16.0)))
                .collect();
            if with_color {
                params.insert("emit_color".into(), ParamValue::Text(COLORS[rng.gen_range(0..4)].into()));
            }
            make_candidate(format!("r1s{i}"), params, format!("candidate {i}"))
        })
        .collect()
}

fn num(c: &Candidate, p: &str) -> f64 {
    match &c.params[p] {
        ParamValue::Num(x) => *x,
        ParamValue::Text(_) => unreachable!(),
    }
}

pub fn scopes(cases: u64) -> Result<usize, String> {
    let mut checked = 0;
    for seed in 0..cases {
        let mut rng = StdRng::seed_from_u64(seed);
        let selected = random_selection(&mut rng);
        let (numeric, categorical) = extract_scopes(&selected).map_err(|e| e.to_string())?;
        for p in NUMERIC {
            let mut lo = num(&selected[0], p);
            let mut hi = lo;
            for c in &selected[1..] {
                let v = num(c, p);
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
            let s = numeric.get(p).ok_or_else(|| format!("seed {seed}: no scope for {p}"))?;
            ensure(s.min == lo && s.max == hi, || format!("seed {seed}: {p} scope [{}, {}] vs [{lo}, {hi}]", s.min, s.max))?;
            checked += 1;
        }
        if selected[0].params.contains_key("emit_color") {
            let want: BTreeSet<String> = selected
                .iter()
                .map(|c| match &c.params["emit_color"] {
                    ParamValue::Text(t) => t.clone(),
                    ParamValue::Num(_) => unreachable!(),
                })
                .collect();
            ensure(categorical.get("emit_color") == Some(&want), || format!("seed {seed}: colour scope"))?;
        }
        let spec = plan_from_selection(&ProceduralProvider, &selected, "").map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(spec.numeric_scopes == numeric && spec.categorical_scopes == categorical, || {
            format!("seed {seed}: emitted scopes differ from extracted ones")
        })?;
        for c in &selected {
            ensure(spec.contains(c), || format!("seed {seed}: {} outside its own scopes", c.id))?;
        }
    }
    Ok(checked)
}

pub const BUDGETS: [(u32, u32, u32); 6] = [(2, 1, 6), (1, 0, 1), (3, 2, 50), (1, 1, 100), (5, 7, 40), (4, 3, 4)];

pub fn retry_budget() -> Result<usize, String> {
    let mut checked = 0;
    for (base, per_step, cap) in BUDGETS {
        let budget = RetryBudget::new(base, per_step, cap).map_err(|e| e.to_string())?;
        for complexity in 0..=100u64 {
            let want = u64::from(cap).min(u64::from(base) + u64::from(per_step) * complexity);
            let got = compute_retry_budget(&budget, complexity as usize);
            ensure(u64::from(got) == want, || {
                format!("base {base} per_step {per_step} cap {cap} complexity {complexity}: {got} vs {want}")
            })?;
            checked += 1;
        }
    }
    Ok(checked)
}

pub fn run() -> Outcome {
    let s = scopes(200)?;
    let b = retry_budget()?;
    Ok(format!(
        "{s} numeric scopes over 200 selections equal min/max and contain every selected candidate; {b} retry budgets equal min(cap, base + per_step * complexity)"
    ))
}

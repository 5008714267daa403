//! Retrieval against a brute-force scorer with its own embedding code.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use dccflow::rag::{ChunkConfig, MockEmbedder, RagIndex};

use super::{ensure, Outcome};

const WORDS: [&str; 24] = [
    "roof", "wall", "door", "window", "lamp", "table", "chair", "stone", "wood", "glass", "red", "blue", "tall",
    "low", "wide", "round", "light", "floor", "tower", "bridge", "garden", "steel", "arch", "beam",
];

pub const CHILD_MAX: usize = 30;
pub const PARENT_MAX: usize = 150;

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn embed(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; 64];
    let lower = text.to_ascii_lowercase();
    for tok in lower.split(|c: char| !c.is_ascii_alphanumeric()).filter(|t| !t.is_empty()) {
        v[(fnv(tok.as_bytes()) % 64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
    }
    for x in a {
        na += x * x;
    }
    for x in b {
        nb += x * x;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// A sentence between 16 and CHILD_MAX characters, so no two ever share a
/// child chunk.
fn sentence(rng: &mut StdRng) -> String {
    loop {
        let count = rng.gen_range(2..=5);
        let words: Vec<&str> = (0..count).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let s = format!("{}.", words.join(" "));
        if (16..=CHILD_MAX).contains(&s.len()) {
            return s;
        }
    }
}

pub struct Corpus {
    pub docs: Vec<(String, String)>,
    pub sentences: Vec<String>,
}

/// Documents whose sentences total exactly `children`. A pool of repeated
/// sentences makes score ties common.
pub fn corpus(children: usize, seed: u64) -> Corpus {
    let mut rng = StdRng::seed_from_u64(seed);
    let pool: Vec<String> = (0..children / 4).map(|_| sentence(&mut rng)).collect();
    let mut sentences = Vec::new();
    let mut docs = Vec::new();
    while sentences.len() < children {
        let mut paras = Vec::new();
        for _ in 0..rng.gen_range(1..=5) {
            let mut para = Vec::new();
            for _ in 0..rng.gen_range(1..=4) {
                if sentences.len() == children {
                    break;
                }
                let s = if rng.gen_bool(0.5) {
                    pool.choose(&mut rng).unwrap().clone()
                } else {
                    sentence(&mut rng)
                };
                sentences.push(s.clone());
                para.push(s);
            }
            if !para.is_empty() {
                paras.push(para.join(" "));
            }
        }
        docs.push((format!("doc{:03}", docs.len()), paras.join("\n\n")));
    }
    Corpus { docs, sentences }
}

pub fn build(c: &Corpus) -> Result<RagIndex, String> {
    let config = ChunkConfig::new(PARENT_MAX, CHILD_MAX).map_err(|e| e.to_string())?;
    let mut index = RagIndex::new(config, &MockEmbedder);
    for (id, text) in &c.docs {
        index.ingest(id, text, &MockEmbedder).map_err(|e| e.to_string())?;
    }
    Ok(index)
}

/// (parent id, score, best child id), best first, ties by parent id.
pub fn brute_force(index: &RagIndex, query: &str, k: usize) -> Vec<(String, f64, String)> {
    let q = embed(query);
    let mut rows: Vec<(String, f64, String)> = Vec::new();
    for p in index.parents() {
        let mut best: Option<(f64, String)> = None;
        for c in index.children().iter().filter(|c| c.parent_id == p.id) {
            let s = cos(&q, &embed(&c.text));
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, c.id.clone()));
            }
        }
        if let Some((s, cid)) = best {
            rows.push((p.id.clone(), s, cid));
        }
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    rows
}

pub fn queries(c: &Corpus, count: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| match i % 3 {
            0 => c.sentences.choose(&mut rng).unwrap().clone(),
            1 => (0..rng.gen_range(1..=4)).map(|_| *WORDS.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" "),
            _ => format!("{} nothing", WORDS.choose(&mut rng).unwrap()),
        })
        .collect()
}

pub struct Stats {
    pub children: usize,
    pub parents: usize,
    pub queries: usize,
    pub ties: usize,
}

pub fn compare(children: usize, nq: usize, k: usize) -> Result<Stats, String> {
    let c = corpus(children, 11);
    let index = build(&c)?;
    ensure(index.children().len() == children, || format!("{} children, wanted {children}", index.children().len()))?;
    let texts: Vec<&str> = index.children().iter().map(|ch| ch.text.as_str()).collect();
    ensure(texts == c.sentences.iter().map(String::as_str).collect::<Vec<_>>(), || {
        "child chunks are not the generated sentences".into()
    })?;
    let mut ties = 0;
    for q in queries(&c, nq, 5) {
        let got = index.query(&q, k, &MockEmbedder);
        let want = brute_force(&index, &q, k);
        ensure(got.len() == want.len(), || format!("{q:?}: {} hits vs {}", got.len(), want.len()))?;
        for (rank, (g, w)) in got.iter().zip(&want).enumerate() {
            ensure(g.parent.id == w.0 && g.score.to_bits() == w.1.to_bits() && g.best_child_id == w.2, || {
                format!("{q:?} rank {rank}: ({}, {}, {}) vs {w:?}", g.parent.id, g.score, g.best_child_id)
            })?;
            ensure((-1.0..=1.0).contains(&g.score), || format!("{q:?}: score {}", g.score))?;
        }
        let distinct: BTreeSet<&str> = got.iter().map(|h| h.parent.id.as_str()).collect();
        ensure(distinct.len() == got.len(), || format!("{q:?}: duplicate parents"))?;
        ties += got.windows(2).filter(|w| w[0].score == w[1].score).count();
    }
    Ok(Stats {
        children,
        parents: index.parents().len(),
        queries: nq,
        ties,
    })
}

/// Querying with a child's exact text puts its parent first at 1.0.
pub fn exact_child(samples: usize) -> Result<usize, String> {
    let c = corpus(1000, 11);
    let index = build(&c)?;
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..samples {
        let child = index.children().choose(&mut rng).unwrap();
        let hits = index.query(&child.text, 5, &MockEmbedder);
        let top = hits.first().ok_or("no hits")?;
        ensure(top.score == 1.0, || format!("{:?}: top score {}", child.text, top.score))?;
        // With duplicated sentences another parent may tie at 1.0 ahead of
        // it; the child's own parent is then still among the 1.0 hits.
        ensure(hits.iter().any(|h| h.score == 1.0 && h.parent.id == child.parent_id), || {
            format!("{:?}: own parent missing from the 1.0 hits", child.text)
        })?;
    }
    Ok(samples)
}

pub fn run() -> Outcome {
    let s = compare(1000, 50, 10)?;
    let e = exact_child(100)?;
    Ok(format!(
        "{} children in {} parents, {} queries identical to brute force on rank, score and ties ({} tied neighbours); {e} exact-child queries score 1.0 at rank 1",
        s.children, s.parents, s.queries, s.ties
    ))
}

//! Parent/child chunk index with exhaustive cosine retrieval.
//!
//! Children are what gets embedded and scored; a query returns the parents
//! of the best children, one hit per parent, scored by its best child.
//!
//! Index file (`ragindex/1`):
//!
//! ```json
//! {
//!   "schema": "ragindex/1",
//!   "embedder": "mock-fnv1a64-64",
//!   "dim": 64,
//!   "config": {"parent_max_chars": 1200, "child_max_chars": 200},
//!   "parents": [{"id": "guide.md#p0000", "doc_id": "guide.md", "text": "...", "span": [0, 812]}],
//!   "children": [{"id": "guide.md#p0000c000", "parent_id": "guide.md#p0000", "text": "...", "embedding": [0.0, ...]}]
//! }
//! ```
//!
//! Spans are byte offsets into the source document.

pub mod chunk;
pub mod embed;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use embed::{cosine, Embedder, MockEmbedder, MOCK_DIM};

pub const INDEX_SCHEMA: &str = "ragindex/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub parent_max_chars: usize,
    pub child_max_chars: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            parent_max_chars: 1200,
            child_max_chars: 200,
        }
    }
}

impl ChunkConfig {
    pub fn new(parent_max_chars: usize, child_max_chars: usize) -> Result<Self, RagError> {
        if child_max_chars == 0 || parent_max_chars <= child_max_chars {
            return Err(RagError::Config(format!(
                "need parent_max_chars > child_max_chars > 0, got {parent_max_chars} and {child_max_chars}"
            )));
        }
        Ok(Self {
            parent_max_chars,
            child_max_chars,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentChunk {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub span: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildChunk {
    pub id: String,
    pub parent_id: String,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalHit {
    pub parent: ParentChunk,
    pub score: f64,
    pub best_child_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestStats {
    pub documents: usize,
    pub parents: usize,
    pub children: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("chunk config: {0}")]
    Config(String),
    #[error("document '{0}' is already indexed")]
    DuplicateDocument(String),
    #[error("index file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagIndex {
    schema: String,
    embedder: String,
    dim: usize,
    config: ChunkConfig,
    parents: Vec<ParentChunk>,
    children: Vec<ChildChunk>,
}

impl RagIndex {
    pub fn new(config: ChunkConfig, embedder: &dyn Embedder) -> Self {
        Self {
            schema: INDEX_SCHEMA.into(),
            embedder: embedder.name().into(),
            dim: embedder.dim(),
            config,
            parents: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn config(&self) -> ChunkConfig {
        self.config
    }

    pub fn parents(&self) -> &[ParentChunk] {
        &self.parents
    }

    pub fn children(&self) -> &[ChildChunk] {
        &self.children
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn stats(&self) -> IngestStats {
        let mut docs: Vec<&str> = self.parents.iter().map(|p| p.doc_id.as_str()).collect();
        docs.dedup();
        IngestStats {
            documents: docs.len(),
            parents: self.parents.len(),
            children: self.children.len(),
        }
    }

    /// Chunks and embeds one document. An empty or blank document adds
    /// nothing.
    pub fn ingest(&mut self, doc_id: &str, text: &str, embedder: &dyn Embedder) -> Result<IngestStats, RagError> {
        if self.parents.iter().any(|p| p.doc_id == doc_id) {
            return Err(RagError::DuplicateDocument(doc_id.into()));
        }
        let mut stats = IngestStats::default();
        for (pi, span) in chunk::parent_spans(text, self.config.parent_max_chars).into_iter().enumerate() {
            let parent_id = format!("{doc_id}#p{pi:04}");
            for (ci, child) in chunk::child_spans(text, span.clone(), self.config.child_max_chars)
                .into_iter()
                .enumerate()
            {
                let child_text = &text[child];
                self.children.push(ChildChunk {
                    id: format!("{parent_id}c{ci:03}"),
                    parent_id: parent_id.clone(),
                    text: child_text.into(),
                    embedding: embedder.embed(child_text),
                });
                stats.children += 1;
            }
            self.parents.push(ParentChunk {
                id: parent_id,
                doc_id: doc_id.into(),
                text: text[span.clone()].into(),
                span: [span.start, span.end],
            });
            stats.parents += 1;
        }
        stats.documents = usize::from(stats.parents > 0);
        Ok(stats)
    }

    /// Top `k` parents by best child cosine, ties broken by parent id.
    pub fn query(&self, text: &str, k: usize, embedder: &dyn Embedder) -> Vec<RetrievalHit> {
        if k == 0 || self.children.is_empty() {
            return Vec::new();
        }
        let q = embedder.embed(text);
        let mut best: BTreeMap<&str, (f64, &str)> = BTreeMap::new();
        for child in &self.children {
            let score = cosine(&q, &child.embedding);
            best.entry(child.parent_id.as_str())
                .and_modify(|b| {
                    if score > b.0 {
                        *b = (score, child.id.as_str());
                    }
                })
                .or_insert((score, child.id.as_str()));
        }
        let mut ranked: Vec<(&str, f64, &str)> = best.into_iter().map(|(p, (s, c))| (p, s, c)).collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(k);
        let parents: BTreeMap<&str, &ParentChunk> = self.parents.iter().map(|p| (p.id.as_str(), p)).collect();
        ranked
            .into_iter()
            .map(|(pid, score, cid)| RetrievalHit {
                parent: parents[pid].clone(),
                score,
                best_child_id: cid.into(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(text: &str, embedder: &dyn Embedder) -> Result<Self, RagError> {
        let index: RagIndex = serde_json::from_str(text).map_err(|e| RagError::Format(e.to_string()))?;
        if index.schema != INDEX_SCHEMA {
            return Err(RagError::Format(format!("unsupported schema '{}'", index.schema)));
        }
        if index.embedder != embedder.name() || index.dim != embedder.dim() {
            return Err(RagError::Format(format!(
                "built with embedder {}/{}, loading with {}/{}",
                index.embedder,
                index.dim,
                embedder.name(),
                embedder.dim()
            )));
        }
        if let Some(c) = index.children.iter().find(|c| c.embedding.len() != index.dim) {
            return Err(RagError::Format(format!("child '{}' has a {}-dimensional embedding", c.id, c.embedding.len())));
        }
        if let Some(c) = index.children.iter().find(|c| !index.parents.iter().any(|p| p.id == c.parent_id)) {
            return Err(RagError::Format(format!("child '{}' names unknown parent '{}'", c.id, c.parent_id)));
        }
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        std::fs::write(path, self.to_json()).map_err(|source| RagError::Io {
            path: path.into(),
            source,
        })
    }

    pub fn load(path: &Path, embedder: &dyn Embedder) -> Result<Self, RagError> {
        let text = std::fs::read_to_string(path).map_err(|source| RagError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_json(&text, embedder)
    }
}

/// Collects `.md` and `.txt` files under each path (files are taken as
/// given), sorted, with ids relative to `root`.
pub fn collect_documents(root: &Path, paths: &[PathBuf]) -> Result<Vec<(String, PathBuf)>, RagError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), RagError> {
        let io = |source| RagError::Io {
            path: dir.into(),
            source,
        };
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e == "md" || e == "txt") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for p in paths {
        let full = root.join(p);
        if full.is_dir() {
            walk(&full, &mut files)?;
        } else if full.is_file() {
            files.push(full);
        } else {
            return Err(RagError::Io {
                path: full,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            });
        }
    }
    files.sort();
    files.dedup();
    Ok(files
        .into_iter()
        .map(|f| {
            let id = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            (id, f)
        })
        .collect())
}

pub fn ingest_paths(
    root: &Path,
    paths: &[PathBuf],
    config: ChunkConfig,
    embedder: &dyn Embedder,
) -> Result<RagIndex, RagError> {
    let mut index = RagIndex::new(config, embedder);
    for (id, path) in collect_documents(root, paths)? {
        let text = std::fs::read_to_string(&path).map_err(|source| RagError::Io { path, source })?;
        index.ingest(&id, &text, embedder)?;
    }
    Ok(index)
}

//! Embedding storage and the log-ratio distances used to compare a query
//! embedding with the support sets attached to tree nodes.
//!
//! The interchange format is UTF-8 JSONL, one object per line:
//! `{"id": string, "label": string|null, "vector": [number, ...]}`. The
//! dimension is fixed by the first vector. Records with id `__meta__` are
//! header records written by the extractor and are skipped.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, TreeNode};

pub const META_RECORD_ID: &str = "__meta__";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read embeddings from {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: dimension mismatch, expected {expected} but found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: vector {id:?} contains a non-finite value")]
    NonFinite { line: usize, id: String },
    #[error("line {line}: duplicate embedding id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("vectors have different dimensions ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("unknown embedding id {0:?}")]
    UnknownId(String),
    #[error("node {0} has an empty support set")]
    EmptySupport(NodeId),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub id: String,
    pub label: Option<String>,
    pub vector: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(id: impl Into<String>, label: Option<String>, vector: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector {
            id: id.into(),
            label,
            vector,
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("embedding serializes")
    }
}

/// Read-only (after loading) collection of embeddings with a common
/// dimension, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    entries: Vec<EmbeddingVector>,
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    vector: Option<Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new() -> EmbeddingStore {
        EmbeddingStore::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Entries in insertion (file) order.
    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.entries.iter()
    }

    pub fn insert(&mut self, e: EmbeddingVector) -> Result<(), EmbeddingError> {
        let line = self.entries.len() + 1;
        self.insert_at_line(e, line)
    }

    fn insert_at_line(&mut self, e: EmbeddingVector, line: usize) -> Result<(), EmbeddingError> {
        if e.vector.is_empty() {
            return Err(EmbeddingError::Parse {
                line,
                message: format!("vector {:?} is empty", e.id),
            });
        }
        if let Some(expected) = self.dim {
            if e.dim() != expected {
                return Err(EmbeddingError::DimensionMismatch {
                    line,
                    expected,
                    found: e.dim(),
                });
            }
        }
        if e.vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite { line, id: e.id });
        }
        if self.index.contains_key(&e.id) {
            return Err(EmbeddingError::DuplicateId { line, id: e.id });
        }
        self.dim = Some(e.dim());
        self.index.insert(e.id.clone(), self.entries.len());
        self.entries.push(e);
        Ok(())
    }

    /// Parses JSONL text. Line numbers in errors are 1-based file lines.
    pub fn from_jsonl(text: &str) -> Result<EmbeddingStore, EmbeddingError> {
        let mut store = EmbeddingStore::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: RawRecord = serde_json::from_str(raw).map_err(|e| {
                // serde_json refuses NaN/Infinity literals; surface those as non-finite
                let message = e.to_string();
                EmbeddingError::Parse { line, message }
            })?;
            if rec.id == META_RECORD_ID {
                continue;
            }
            let vector = rec.vector.ok_or_else(|| EmbeddingError::Parse {
                line,
                message: format!("record {:?} has no vector", rec.id),
            })?;
            store.insert_at_line(EmbeddingVector::new(rec.id, rec.label, vector), line)?;
        }
        Ok(store)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Resolves a node's support ids into a [`SupportSet`].
    pub fn support_set<'a>(&'a self, node: &TreeNode) -> Result<SupportSet<'a>, EmbeddingError> {
        if node.support.is_empty() {
            return Err(EmbeddingError::EmptySupport(node.id));
        }
        let members = node
            .support
            .iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| EmbeddingError::UnknownId(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SupportSet {
            node_id: node.id,
            members,
        })
    }
}

/// Loads an embedding JSONL file.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore, EmbeddingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmbeddingStore::from_jsonl(&text)
}

/// The embeddings grounding one node.
#[derive(Debug, Clone)]
pub struct SupportSet<'a> {
    pub node_id: NodeId,
    pub members: Vec<&'a EmbeddingVector>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConfig {
    epsilon: f64,
}

impl DistanceConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(epsilon: f64) -> Result<DistanceConfig, EmbeddingError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(EmbeddingError::InvalidEpsilon(epsilon));
        }
        Ok(DistanceConfig { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

pub fn squared_distance(q: &[f64], p: &[f64]) -> Result<f64, EmbeddingError> {
    if q.len() != p.len() {
        return Err(EmbeddingError::Dimension(q.len(), p.len()));
    }
    Ok(q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `-ln((s + 1) / (s + eps))` for a squared distance `s`.
///
/// Written as `-ln_1p((1 - eps) / (s + eps))`, which is the same quantity
/// without cancellation for large `s`. The result lies in `[ln eps, 0)` and
/// grows strictly with `s`.
pub fn log_ratio_distance(squared: f64, cfg: &DistanceConfig) -> f64 {
    let eps = cfg.epsilon;
    -((1.0 - eps) / (squared + eps)).ln_1p()
}

/// Stabilized log distance between two embeddings. The unstabilized form
/// `-ln(1 + 1/s)` is the `eps -> 0` limit.
pub fn pair_distance(q: &[f64], p: &[f64], cfg: &DistanceConfig) -> Result<f64, EmbeddingError> {
    Ok(log_ratio_distance(squared_distance(q, p)?, cfg))
}

/// Point-to-set distance: the minimum pair distance over the support set.
pub fn set_distance(
    q: &[f64],
    set: &SupportSet<'_>,
    cfg: &DistanceConfig,
) -> Result<f64, EmbeddingError> {
    if set.members.is_empty() {
        return Err(EmbeddingError::EmptySupport(set.node_id));
    }
    // d is monotone in the squared distance, so take the min there first
    let mut best = f64::INFINITY;
    for m in &set.members {
        best = best.min(squared_distance(q, &m.vector)?);
    }
    Ok(log_ratio_distance(best, cfg))
}

/// Distance from `q` to the support set of `node`.
pub fn node_distance(
    q: &[f64],
    node: &TreeNode,
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<f64, EmbeddingError> {
    set_distance(q, &store.support_set(node)?, cfg)
}

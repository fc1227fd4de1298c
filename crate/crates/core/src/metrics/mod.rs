//! Tree-similarity and faithfulness metrics.
//!
//! All structural metrics compare nodes by label text only; node ids and
//! kinds are local to the tree that produced them.

mod kernel;
mod mcs;
mod mscd;
mod report;
mod ted;

pub use kernel::{theta, tk_score, tree_kernel};
pub use mcs::{mcs, mcs_score, CommonSubtree};
pub use mscd::{mscd, sample_mscd};
pub use report::{MetricReport, MetricRow, MetricSummary};
pub use ted::{ted, ted_labeled};

use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::tree::{AttributeTree, NodeId};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("tree kernel decay must lie in (0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("explanation node {0:?} has no support set")]
    UnsupportedNode(String),
    #[error("explanation for sample {0:?} has no supported nodes")]
    NothingSupported(String),
    #[error("no samples to average")]
    NoSamples,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    tk_lambda: f64,
    pub oracle_max_nodes: usize,
}

impl MetricConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.5;
    pub const DEFAULT_ORACLE_MAX_NODES: usize = 6;

    pub fn new(tk_lambda: f64, oracle_max_nodes: usize) -> Result<MetricConfig, MetricError> {
        if !(tk_lambda > 0.0 && tk_lambda < 1.0) {
            return Err(MetricError::InvalidLambda(tk_lambda));
        }
        Ok(MetricConfig {
            tk_lambda,
            oracle_max_nodes,
        })
    }

    pub fn tk_lambda(&self) -> f64 {
        self.tk_lambda
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            tk_lambda: Self::DEFAULT_LAMBDA,
            oracle_max_nodes: Self::DEFAULT_ORACLE_MAX_NODES,
        }
    }
}

/// Flat, preorder-indexed view of an ordered labeled tree. May be empty,
/// which [`AttributeTree`] cannot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledTree {
    pub labels: Vec<String>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    /// Source node id of each preorder slot.
    pub ids: Vec<NodeId>,
}

impl LabeledTree {
    pub fn empty() -> LabeledTree {
        LabeledTree::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl From<&AttributeTree> for LabeledTree {
    fn from(tree: &AttributeTree) -> LabeledTree {
        let order = tree.preorder();
        let rank = tree.preorder_rank();
        let mut depth = vec![0; order.len()];
        for (i, &id) in order.iter().enumerate() {
            if let Some(p) = tree.parent(id) {
                depth[i] = depth[rank[&p]] + 1;
            }
        }
        LabeledTree {
            labels: order
                .iter()
                .map(|&id| tree.label(id).unwrap().to_string())
                .collect(),
            children: order
                .iter()
                .map(|&id| tree.children(id).iter().map(|c| rank[c]).collect())
                .collect(),
            depth,
            ids: order,
        }
    }
}

//! Test-time routing: a sample's embedding selects the `k` nodes of its
//! predicted category's tree with the smallest point-to-set distance, and
//! the root paths of those nodes form the explanation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{node_distance, DistanceConfig, EmbeddingError, EmbeddingStore};
use crate::tree::{merge_paths, AttributeTree, ExplanationTree, NodeId, TreeBuilder, TreeError};

/// Trees keyed by category name.
pub type CategoryTrees = BTreeMap<String, AttributeTree>;

pub const NO_FINDINGS: &str = "No Findings";
pub const HAS_FINDINGS: &str = "has Findings";

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("no tree for category {0:?}")]
    UnknownCategory(String),
    #[error("k = {k} exceeds the {available} supported node(s) of {category:?}")]
    TooFewSupported {
        category: String,
        k: usize,
        available: usize,
    },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("expected {expected} finding flags, got {found}")]
    FlagLength { expected: usize, found: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutingConfig {
    k: usize,
}

impl RoutingConfig {
    pub const DEFAULT_K: usize = 5;

    pub fn new(k: usize) -> Result<RoutingConfig, RoutingError> {
        if k == 0 {
            return Err(RoutingError::ZeroK);
        }
        Ok(RoutingConfig { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig { k: Self::DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDistance {
    #[serde(skip)]
    pub node: NodeId,
    #[serde(rename = "node")]
    pub label: String,
    pub distance: f64,
}

/// An explanation together with the distances of its selected nodes.
#[derive(Debug, Clone)]
pub struct Routed {
    pub explanation: ExplanationTree,
    /// Selected nodes, nearest first.
    pub distances: Vec<NodeDistance>,
}

/// Distance from `q` to every supported non-root node, nearest first. Ties
/// keep preorder.
pub fn rank_nodes(
    q: &[f64],
    tree: &AttributeTree,
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<Vec<NodeDistance>, RoutingError> {
    let mut ranked = Vec::new();
    for id in tree.preorder() {
        let node = tree.node(id).expect("preorder ids exist");
        if id == tree.root() || node.support.is_empty() {
            continue;
        }
        ranked.push(NodeDistance {
            node: id,
            label: node.label.clone(),
            distance: node_distance(q, node, store, cfg)?,
        });
    }
    // stable sort keeps preorder among equal distances
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(ranked)
}

/// Routes `q` through a single tree.
pub fn explain_in_tree(
    q: &[f64],
    tree: &AttributeTree,
    store: &EmbeddingStore,
    route: &RoutingConfig,
    dist: &DistanceConfig,
) -> Result<Routed, RoutingError> {
    let mut ranked = rank_nodes(q, tree, store, dist)?;
    if route.k > ranked.len() {
        return Err(RoutingError::TooFewSupported {
            category: tree.category().to_string(),
            k: route.k,
            available: ranked.len(),
        });
    }
    ranked.truncate(route.k);
    let selected: Vec<NodeId> = ranked.iter().map(|d| d.node).collect();
    Ok(Routed {
        explanation: merge_paths(tree, &selected)?,
        distances: ranked,
    })
}

/// Explanation for an embedding under its predicted category.
pub fn explain(
    q: &[f64],
    predicted: &str,
    trees: &CategoryTrees,
    store: &EmbeddingStore,
    route: &RoutingConfig,
    dist: &DistanceConfig,
) -> Result<Routed, RoutingError> {
    let tree = trees
        .get(predicted)
        .ok_or_else(|| RoutingError::UnknownCategory(predicted.to_string()))?;
    explain_in_tree(q, tree, store, route, dist)
}

/// Binary finding flags of a multi-label prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiLabelPrediction {
    pub flags: Vec<bool>,
}

impl MultiLabelPrediction {
    pub fn from_bits(bits: &[u8]) -> MultiLabelPrediction {
        MultiLabelPrediction {
            flags: bits.iter().map(|&b| b != 0).collect(),
        }
    }
}

/// Multi-label explanation. With no positive finding the result is the
/// single node `No Findings`; otherwise a `has Findings` root whose children
/// are the per-finding explanations, in finding order.
pub fn explain_multilabel(
    q: &[f64],
    prediction: &MultiLabelPrediction,
    finding_trees: &[AttributeTree],
    store: &EmbeddingStore,
    route: &RoutingConfig,
    dist: &DistanceConfig,
) -> Result<ExplanationTree, RoutingError> {
    if prediction.flags.len() != finding_trees.len() {
        return Err(RoutingError::FlagLength {
            expected: finding_trees.len(),
            found: prediction.flags.len(),
        });
    }
    if !prediction.flags.iter().any(|&f| f) {
        return Ok(ExplanationTree {
            tree: AttributeTree::singleton(NO_FINDINGS)?,
            source_sample: None,
            selected: Vec::new(),
        });
    }
    let mut tree = TreeBuilder::new(HAS_FINDINGS)?.build();
    let root = tree.root();
    let mut selected = Vec::new();
    for (finding, _) in finding_trees
        .iter()
        .zip(&prediction.flags)
        .filter(|(_, &f)| f)
    {
        let routed = explain_in_tree(q, finding, store, route, dist)?;
        let (next, map) = tree.with_attached(root, &routed.explanation.tree)?;
        let lookup: BTreeMap<NodeId, NodeId> = map.into_iter().collect();
        selected.extend(routed.explanation.selected.iter().map(|s| lookup[s]));
        tree = next;
    }
    Ok(ExplanationTree {
        tree,
        source_sample: None,
        selected,
    })
}

/// One line of the batch explanation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub sample_id: String,
    pub predicted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub explanation: serde_json::Value,
    #[serde(default)]
    pub node_distances: Vec<NodeDistance>,
}

impl ExplanationRecord {
    pub fn new(
        sample_id: &str,
        predicted: &str,
        method: Option<&str>,
        explanation: &ExplanationTree,
        node_distances: Vec<NodeDistance>,
    ) -> ExplanationRecord {
        ExplanationRecord {
            sample_id: sample_id.to_string(),
            predicted: predicted.to_string(),
            method: method.map(str::to_string),
            explanation: explanation.tree.to_json_value(),
            node_distances,
        }
    }

    pub fn tree(&self) -> Result<AttributeTree, TreeError> {
        crate::tree::tree_from_value(&self.explanation)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

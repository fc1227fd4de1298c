//! Faithfulness as the mean point-to-set distance between a sample's
//! embedding and the support sets of the nodes in its explanation. More
//! negative means the explanation sits closer to the model's own geometry.

use super::MetricError;
use crate::embedding::{node_distance, DistanceConfig, EmbeddingStore};
use crate::tree::ExplanationTree;

/// Mean distance from `q` to every supported node of one explanation. The
/// explanation root (the category) carries no support and is skipped; any
/// other node without support is an error.
pub fn sample_mscd(
    q: &[f64],
    explanation: &ExplanationTree,
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<f64, MetricError> {
    let tree = &explanation.tree;
    let mut sum = 0.0;
    let mut count = 0usize;
    for id in tree.preorder() {
        let node = tree.node(id).expect("preorder ids exist");
        if node.support.is_empty() {
            if id == tree.root() {
                continue;
            }
            return Err(MetricError::UnsupportedNode(tree.label_path(id)));
        }
        sum += node_distance(q, node, store, cfg)?;
        count += 1;
    }
    if count == 0 {
        let name = explanation
            .source_sample
            .clone()
            .unwrap_or_else(|| tree.category().to_string());
        return Err(MetricError::NothingSupported(name));
    }
    Ok(sum / count as f64)
}

/// Per-sample MSCD averaged over all samples.
pub fn mscd(
    samples: &[(&[f64], &ExplanationTree)],
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<f64, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::NoSamples);
    }
    let mut total = 0.0;
    for (q, e) in samples {
        total += sample_mscd(q, e, store, cfg)?;
    }
    Ok(total / samples.len() as f64)
}

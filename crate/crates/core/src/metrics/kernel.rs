//! Depth-decayed subtree kernel.
//!
//! `TK(A, B) = sum over node pairs (u, v) of theta(u, v)^2 * lambda^max(depth u, depth v)`,
//! where `theta` counts shared structure between the complete subtrees rooted
//! at `u` and `v`:
//!
//! * two leaves: 1 if the labels agree, else 0;
//! * a leaf against an internal node: 0;
//! * two internal nodes with different labels: 0;
//! * two internal nodes with equal labels: the sum of `theta` over all
//!   child pairs, plus 1 when the two subtrees are identical as ordered
//!   labeled trees.
//!
//! Depth counts from the tree root at 0. The square of `theta` is kept as
//! defined; `theta` itself is a positive semi-definite kernel, so the squared,
//! min-decayed sum is too and normalized scores never exceed 100.

use super::{LabeledTree, MetricConfig};
use crate::tree::AttributeTree;

/// Shared-subtree count table for every pair of preorder slots.
struct ThetaTable {
    theta: Vec<Vec<u64>>,
}

impl ThetaTable {
    fn new(a: &LabeledTree, b: &LabeledTree) -> ThetaTable {
        let (n, m) = (a.len(), b.len());
        let mut theta = vec![vec![0u64; m]; n];
        let mut iso = vec![vec![false; m]; n];
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                let (ca, cb) = (&a.children[i], &b.children[j]);
                let same_label = a.labels[i] == b.labels[j];
                iso[i][j] = same_label
                    && ca.len() == cb.len()
                    && ca.iter().zip(cb).all(|(&x, &y)| iso[x][y]);
                theta[i][j] = match (ca.is_empty(), cb.is_empty()) {
                    (true, true) => u64::from(same_label),
                    (true, false) | (false, true) => 0,
                    (false, false) if !same_label => 0,
                    (false, false) => {
                        let mut sum = 0u64;
                        for &x in ca {
                            for &y in cb {
                                sum = sum.saturating_add(theta[x][y]);
                            }
                        }
                        sum.saturating_add(u64::from(iso[i][j]))
                    }
                };
            }
        }
        ThetaTable { theta }
    }
}

/// `theta` between the two whole trees (their roots).
pub fn theta(a: &AttributeTree, b: &AttributeTree) -> u64 {
    let (la, lb) = (LabeledTree::from(a), LabeledTree::from(b));
    ThetaTable::new(&la, &lb).theta[0][0]
}

pub fn tree_kernel(a: &AttributeTree, b: &AttributeTree, cfg: &MetricConfig) -> f64 {
    kernel_labeled(
        &LabeledTree::from(a),
        &LabeledTree::from(b),
        cfg.tk_lambda(),
    )
}

pub(crate) fn kernel_labeled(a: &LabeledTree, b: &LabeledTree, lambda: f64) -> f64 {
    let table = ThetaTable::new(a, b);
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let t = table.theta[i][j];
            if t == 0 {
                continue;
            }
            let t = t as f64;
            let depth = a.depth[i].max(b.depth[j]);
            total += t * t * lambda.powi(depth as i32);
        }
    }
    total
}

/// `TK(a, b) * 100 / sqrt(TK(a, a) * TK(b, b))`. A zero self-kernel scores 0.
pub fn tk_score(a: &AttributeTree, b: &AttributeTree, cfg: &MetricConfig) -> f64 {
    let (la, lb) = (LabeledTree::from(a), LabeledTree::from(b));
    let lambda = cfg.tk_lambda();
    let norm = kernel_labeled(&la, &la, lambda) * kernel_labeled(&lb, &lb, lambda);
    if norm <= 0.0 {
        log::warn!("tree kernel self-similarity is zero; scoring as 0");
        return 0.0;
    }
    let score = kernel_labeled(&la, &lb, lambda) * 100.0 / norm.sqrt();
    // rounding can push an exact match a hair over 100
    score.min(100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;

    fn t(s: &str) -> AttributeTree {
        parse_tree(s).unwrap()
    }

    fn cfg() -> MetricConfig {
        MetricConfig::default()
    }

    #[test]
    fn single_nodes() {
        let a = t(r#"{"name":"A"}"#);
        let b = t(r#"{"name":"B"}"#);
        assert_eq!(tree_kernel(&a, &a, &cfg()), 1.0);
        assert_eq!(tree_kernel(&a, &b, &cfg()), 0.0);
        assert_eq!(tk_score(&a, &b, &cfg()), 0.0);
        assert_eq!(tk_score(&a, &a, &cfg()), 100.0);
    }

    #[test]
    fn parent_child_pair() {
        // theta(A(B), A(B)) = theta(B, B) + 1 = 2 at depth 0, plus theta(B, B) = 1 at depth 1
        let a = t(r#"{"name":"A","children":[{"name":"B"}]}"#);
        assert_eq!(theta(&a, &a), 2);
        assert_eq!(tree_kernel(&a, &a, &cfg()), 4.0 + 0.5);
    }

    #[test]
    fn non_isomorphic_same_root() {
        // A(B, C) vs A(B): roots share label but differ in shape
        let a = t(r#"{"name":"A","children":[{"name":"B"},{"name":"C"}]}"#);
        let b = t(r#"{"name":"A","children":[{"name":"B"}]}"#);
        assert_eq!(theta(&a, &b), 1);
        // root pair 1 * 1, B/B pair 1 * 0.5
        assert_eq!(tree_kernel(&a, &b, &cfg()), 1.5);
        // self-kernel of a: root theta = 1 + 1 + 1 (isomorphic) = 3, then B/B and C/C at depth 1
        assert_eq!(tree_kernel(&a, &a, &cfg()), 9.0 + 0.5 + 0.5);
        let s = tk_score(&a, &b, &cfg());
        let expected = 1.5 * 100.0 / (10.0f64 * 4.5).sqrt();
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn leaf_against_internal_is_zero() {
        let a = t(r#"{"name":"A"}"#);
        let b = t(r#"{"name":"A","children":[{"name":"B"}]}"#);
        assert_eq!(theta(&a, &b), 0);
        // B sits at depth 1 in b only, and a has no B
        assert_eq!(tree_kernel(&a, &b, &cfg()), 0.0);
    }
}

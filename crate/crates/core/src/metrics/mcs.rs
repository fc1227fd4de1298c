//! Maximum common connected subtree under label-preserving, edge-preserving
//! matching.
//!
//! A common subtree is a pair of connected node sets, one per tree, with a
//! label-preserving bijection that maps parent/child edges onto
//! parent/child edges in both directions. The topmost nodes of the two sets
//! must correspond, so the search is a dynamic program over node pairs:
//! `best(u, v) = 1 + sum of best(c, c')` over children pairs with equal
//! labels. Sibling labels are unique in a valid tree, so each child has at
//! most one partner and no assignment problem arises.

use std::collections::HashMap;

use super::LabeledTree;
use crate::tree::{AttributeTree, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommonSubtree {
    /// Matched node ids in the first tree, in its preorder.
    pub left: Vec<NodeId>,
    /// Partner of each entry of `left` in the second tree.
    pub right: Vec<NodeId>,
}

impl CommonSubtree {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }
}

/// A maximum common subtree. Among equally large candidates, the one whose
/// top pair comes first in (left preorder, right preorder) order wins.
pub fn mcs(a: &AttributeTree, b: &AttributeTree) -> CommonSubtree {
    let (la, lb) = (LabeledTree::from(a), LabeledTree::from(b));
    let table = BestTable::new(&la, &lb);
    let mut top = None;
    let mut top_size = 0;
    for i in 0..la.len() {
        for j in 0..lb.len() {
            let s = table.best[i][j];
            if s > top_size {
                top_size = s;
                top = Some((i, j));
            }
        }
    }
    let mut out = CommonSubtree::default();
    if let Some((i, j)) = top {
        let mut pairs = Vec::new();
        table.collect(i, j, &mut pairs);
        pairs.sort_unstable();
        out.left = pairs.iter().map(|&(x, _)| la.ids[x]).collect();
        out.right = pairs.iter().map(|&(_, y)| lb.ids[y]).collect();
    }
    out
}

/// `|MCS| * 100 / sqrt(|a| * |b|)`.
pub fn mcs_score(a: &AttributeTree, b: &AttributeTree) -> f64 {
    let common = mcs(a, b).len() as f64;
    common * 100.0 / ((a.len() * b.len()) as f64).sqrt()
}

struct BestTable<'a> {
    a: &'a LabeledTree,
    b: &'a LabeledTree,
    best: Vec<Vec<usize>>,
    // child partner lookup: for node j of b, label -> child slot
    b_child_by_label: Vec<HashMap<&'a str, usize>>,
}

impl<'a> BestTable<'a> {
    fn new(a: &'a LabeledTree, b: &'a LabeledTree) -> BestTable<'a> {
        let b_child_by_label: Vec<HashMap<&str, usize>> = b
            .children
            .iter()
            .map(|cs| cs.iter().map(|&c| (b.labels[c].as_str(), c)).collect())
            .collect();
        let mut best = vec![vec![0usize; b.len()]; a.len()];
        // preorder slots: children always have larger indices than parents
        for i in (0..a.len()).rev() {
            for j in (0..b.len()).rev() {
                if a.labels[i] != b.labels[j] {
                    continue;
                }
                let mut size = 1;
                for &c in &a.children[i] {
                    if let Some(&d) = b_child_by_label[j].get(a.labels[c].as_str()) {
                        size += best[c][d];
                    }
                }
                best[i][j] = size;
            }
        }
        BestTable {
            a,
            b,
            best,
            b_child_by_label,
        }
    }

    fn collect(&self, i: usize, j: usize, out: &mut Vec<(usize, usize)>) {
        out.push((i, j));
        for &c in &self.a.children[i] {
            if let Some(&d) = self.b_child_by_label[j].get(self.a.labels[c].as_str()) {
                debug_assert_eq!(self.a.labels[c], self.b.labels[d]);
                self.collect(c, d, out);
            }
        }
    }
}

//! Slow, obviously-correct reference implementations of the tree metrics,
//! for cross-checking the production dynamic programs on small trees.
//!
//! Nothing here shares code with `lvx_core::metrics`; the oracles only read
//! trees through the `AttributeTree` accessors and `enumerate_subtrees`.

use std::collections::BTreeSet;

use lvx_core::tree::{enumerate_subtrees, AttributeTree, NodeId, NodeKind, TreeBuilder};
use rand::Rng;

/// Tree flattened to preorder slots with ancestor and ordering relations.
struct Flat {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
}

impl Flat {
    fn new(t: &AttributeTree) -> Flat {
        let order = t.preorder();
        let pos = |id: NodeId| order.iter().position(|&x| x == id).unwrap();
        Flat {
            labels: order
                .iter()
                .map(|&id| t.label(id).unwrap().to_string())
                .collect(),
            parent: order.iter().map(|&id| t.parent(id).map(pos)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn is_ancestor(&self, a: usize, mut d: usize) -> bool {
        while let Some(p) = self.parent[d] {
            if p == a {
                return true;
            }
            d = p;
        }
        false
    }

    /// `a` lies entirely left of `b`: earlier in preorder and not an ancestor.
    fn is_left_of(&self, a: usize, b: usize) -> bool {
        a < b && !self.is_ancestor(a, b)
    }
}

/// Tree edit distance by exhaustive search over edit mappings.
///
/// Every unit-cost edit script corresponds to a mapping between the two node
/// sets that is one-to-one and preserves ancestry and left-to-right order;
/// its cost is the number of relabeled mapped pairs plus the unmapped nodes on
/// both sides. Enumerating all such mappings gives the exact minimum. `None`
/// stands for the empty tree.
pub fn ted_exhaustive(a: Option<&AttributeTree>, b: Option<&AttributeTree>) -> usize {
    let (fa, fb) = match (a, b) {
        (None, None) => return 0,
        (None, Some(t)) | (Some(t), None) => return t.len(),
        (Some(x), Some(y)) => (Flat::new(x), Flat::new(y)),
    };
    let mut best = fa.len() + fb.len();
    let mut pairs = Vec::new();
    let mut used = vec![false; fb.len()];
    search_mappings(&fa, &fb, 0, &mut pairs, &mut used, &mut best);
    best
}

fn search_mappings(
    fa: &Flat,
    fb: &Flat,
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    used: &mut [bool],
    best: &mut usize,
) {
    if i == fa.len() {
        let relabels = pairs
            .iter()
            .filter(|&&(x, y)| fa.labels[x] != fb.labels[y])
            .count();
        let cost = relabels + (fa.len() - pairs.len()) + (fb.len() - pairs.len());
        *best = (*best).min(cost);
        return;
    }
    // leave node i unmapped
    search_mappings(fa, fb, i + 1, pairs, used, best);
    for j in 0..fb.len() {
        if used[j] {
            continue;
        }
        let consistent = pairs.iter().all(|&(x, y)| {
            fa.is_ancestor(x, i) == fb.is_ancestor(y, j)
                && fa.is_ancestor(i, x) == fb.is_ancestor(j, y)
                && fa.is_left_of(x, i) == fb.is_left_of(y, j)
                && fa.is_left_of(i, x) == fb.is_left_of(j, y)
        });
        if consistent {
            used[j] = true;
            pairs.push((i, j));
            search_mappings(fa, fb, i + 1, pairs, used, best);
            pairs.pop();
            used[j] = false;
        }
    }
}

/// Canonical form of the connected set `set` rooted at its topmost node,
/// ignoring child order.
fn canonical(t: &AttributeTree, set: &BTreeSet<NodeId>) -> String {
    let top = *set
        .iter()
        .find(|&&id| t.parent(id).is_none_or(|p| !set.contains(&p)))
        .expect("nonempty connected set has a top");
    fn walk(t: &AttributeTree, set: &BTreeSet<NodeId>, id: NodeId) -> String {
        let mut kids: Vec<String> = t
            .children(id)
            .iter()
            .filter(|c| set.contains(c))
            .map(|&c| walk(t, set, c))
            .collect();
        kids.sort();
        format!("{:?}({})", t.label(id).unwrap(), kids.join(","))
    }
    walk(t, set, top)
}

/// Size of the largest common connected subtree, by comparing every pair of
/// connected node sets.
pub fn mcs_size_exhaustive(a: &AttributeTree, b: &AttributeTree) -> usize {
    let sa = enumerate_subtrees(a, a.len());
    let sb = enumerate_subtrees(b, b.len());
    let cb: Vec<(usize, String)> = sb.iter().map(|s| (s.len(), canonical(b, s))).collect();
    let mut best = 0;
    for s in &sa {
        if s.len() <= best {
            continue;
        }
        let c = canonical(a, s);
        if cb.iter().any(|(n, other)| *n == s.len() && *other == c) {
            best = s.len();
        }
    }
    best
}

/// Owned recursive tree, the shape the kernel definition is written for.
#[derive(Debug, Clone, PartialEq)]
struct Owned {
    label: String,
    children: Vec<Owned>,
}

fn owned(t: &AttributeTree, id: NodeId) -> Owned {
    Owned {
        label: t.label(id).unwrap().to_string(),
        children: t.children(id).iter().map(|&c| owned(t, c)).collect(),
    }
}

fn theta_direct(x: &Owned, y: &Owned) -> f64 {
    match (x.children.is_empty(), y.children.is_empty()) {
        (true, true) => f64::from(u8::from(x.label == y.label)),
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            if x.label != y.label {
                return 0.0;
            }
            let mut sum = 0.0;
            for cx in &x.children {
                for cy in &y.children {
                    sum += theta_direct(cx, cy);
                }
            }
            if x == y {
                sum += 1.0;
            }
            sum
        }
    }
}

/// Tree kernel by direct recursion over every pair of complete subtrees.
pub fn tree_kernel_direct(a: &AttributeTree, b: &AttributeTree, lambda: f64) -> f64 {
    let subtrees = |t: &AttributeTree| -> Vec<(Owned, usize)> {
        t.preorder()
            .into_iter()
            .map(|id| (owned(t, id), t.depth(id).unwrap()))
            .collect()
    };
    let (sa, sb) = (subtrees(a), subtrees(b));
    let mut total = 0.0;
    for (x, dx) in &sa {
        for (y, dy) in &sb {
            let th = theta_direct(x, y);
            total += th * th * lambda.powi((*dx).max(*dy) as i32);
        }
    }
    total
}

/// Random ordered tree with at most `max_nodes` nodes and labels drawn from
/// `alphabet`. Siblings never share a label, so the result is always a valid
/// attribute tree.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, alphabet: &[&str]) -> AttributeTree {
    let target = rng.random_range(1..=max_nodes.max(1));
    let root_label = alphabet[rng.random_range(0..alphabet.len())];
    let mut b = TreeBuilder::new(root_label).unwrap();
    let mut ids = vec![b.root()];
    let mut attempts = 0;
    while ids.len() < target && attempts < 200 {
        attempts += 1;
        let parent = ids[rng.random_range(0..ids.len())];
        let label = alphabet[rng.random_range(0..alphabet.len())];
        if let Ok(id) = b.child(parent, label, NodeKind::Leaf) {
            ids.push(id);
        }
    }
    b.build()
}

/// A copy of `t` with every label prefixed, so it shares no label with any
/// tree built from the original alphabet.
pub fn relabeled(t: &AttributeTree, prefix: &str) -> AttributeTree {
    fn copy(src: &AttributeTree, id: NodeId, b: &mut TreeBuilder, parent: NodeId, prefix: &str) {
        for &c in src.children(id) {
            let n = b
                .child(
                    parent,
                    &format!("{prefix}{}", src.label(c).unwrap()),
                    NodeKind::Leaf,
                )
                .unwrap();
            copy(src, c, b, n, prefix);
        }
    }
    let mut b = TreeBuilder::new(&format!("{prefix}{}", t.category())).unwrap();
    let root = b.root();
    copy(t, t.root(), &mut b, root, prefix);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lvx_core::tree::parse_tree;

    fn t(s: &str) -> AttributeTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn ted_oracle_hand_cases() {
        let ab_c = t(r#"{"name":"A","children":[{"name":"B"},{"name":"C"}]}"#);
        let ab_d = t(r#"{"name":"A","children":[{"name":"B"},{"name":"D"}]}"#);
        assert_eq!(ted_exhaustive(None, None), 0);
        assert_eq!(ted_exhaustive(None, Some(&ab_c)), 3);
        assert_eq!(ted_exhaustive(Some(&ab_c), Some(&ab_d)), 1);
        assert_eq!(ted_exhaustive(Some(&ab_c), Some(&ab_c)), 0);
        // swapping siblings cannot be done by a single mapping that keeps order
        let ac_b = t(r#"{"name":"A","children":[{"name":"C"},{"name":"B"}]}"#);
        assert_eq!(ted_exhaustive(Some(&ab_c), Some(&ac_b)), 2);
        // deleting the middle of a chain
        let chain = t(r#"{"name":"A","children":[{"name":"B","children":[{"name":"C"}]}]}"#);
        let short = t(r#"{"name":"A","children":[{"name":"C"}]}"#);
        assert_eq!(ted_exhaustive(Some(&chain), Some(&short)), 1);
    }

    #[test]
    fn mcs_oracle_hand_cases() {
        let a = t(r#"{"name":"A","children":[{"name":"B"}]}"#);
        let b = t(r#"{"name":"A","children":[{"name":"B"},{"name":"C"}]}"#);
        assert_eq!(mcs_size_exhaustive(&a, &b), 2);
        let x = t(r#"{"name":"X"}"#);
        assert_eq!(mcs_size_exhaustive(&a, &x), 0);
        // parent/child direction matters: A->B does not match B->A
        let ba = t(r#"{"name":"B","children":[{"name":"A"}]}"#);
        assert_eq!(mcs_size_exhaustive(&a, &ba), 1);
    }

    #[test]
    fn kernel_oracle_hand_case() {
        let a = t(r#"{"name":"A","children":[{"name":"B"}]}"#);
        assert_eq!(tree_kernel_direct(&a, &a, 0.5), 4.5);
    }
}

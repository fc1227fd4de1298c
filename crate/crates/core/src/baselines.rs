//! Non-learned comparison explainers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{DistanceConfig, EmbeddingStore};
use crate::routing::{explain_in_tree, CategoryTrees, RoutingConfig, RoutingError};
use crate::tree::{merge_paths, AttributeTree, ExplanationTree, NodeId, TreeError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(
        "cannot sample {requested} nodes from {category:?}, which has {available} non-root node(s)"
    )]
    TooFewNodes {
        category: String,
        requested: usize,
        available: usize,
    },
    #[error("no tree for category {0:?}")]
    UnknownCategory(String),
    #[error("no held-out samples for category {0:?}")]
    NoSamples(String),
    #[error("unknown baseline {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Random,
    Constant,
    Subtree,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Random,
        BaselineKind::Constant,
        BaselineKind::Subtree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Constant => "constant",
            BaselineKind::Subtree => "subtree",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BaselineError::UnknownKind(s.to_string()))
    }
}

pub const DEFAULT_RANDOM_NODES: usize = 5;

/// `n_nodes` distinct non-root nodes drawn uniformly with `seed`, joined by
/// their root paths.
pub fn random_baseline(
    tree: &AttributeTree,
    n_nodes: usize,
    seed: u64,
) -> Result<ExplanationTree, BaselineError> {
    let pool: Vec<NodeId> = tree
        .preorder()
        .into_iter()
        .filter(|&id| id != tree.root())
        .collect();
    if n_nodes > pool.len() {
        return Err(BaselineError::TooFewNodes {
            category: tree.category().to_string(),
            requested: n_nodes,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<NodeId> = rand::seq::index::sample(&mut rng, pool.len(), n_nodes)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    Ok(merge_paths(tree, &picked)?)
}

/// The whole initial tree of `category`, the same for every sample.
pub fn constant_baseline(
    category: &str,
    initial: &CategoryTrees,
) -> Result<ExplanationTree, BaselineError> {
    let tree = initial
        .get(category)
        .ok_or_else(|| BaselineError::UnknownCategory(category.to_string()))?;
    let all: Vec<NodeId> = tree
        .preorder()
        .into_iter()
        .filter(|&id| id != tree.root())
        .collect();
    Ok(merge_paths(tree, &all)?)
}

/// Routes every held-out sample of `category`, then keeps the `k` nodes
/// selected most often (ties by preorder) as one fixed explanation.
pub fn subtree_baseline(
    category: &str,
    held_out: &[&[f64]],
    trees: &CategoryTrees,
    store: &EmbeddingStore,
    route: &RoutingConfig,
    dist: &DistanceConfig,
) -> Result<ExplanationTree, BaselineError> {
    let tree = trees
        .get(category)
        .ok_or_else(|| BaselineError::UnknownCategory(category.to_string()))?;
    if held_out.is_empty() {
        return Err(BaselineError::NoSamples(category.to_string()));
    }
    let frequency = selection_frequency(category, held_out, trees, store, route, dist)?;
    let rank = tree.preorder_rank();
    let mut nodes: Vec<(NodeId, usize)> = frequency.into_iter().collect();
    nodes.sort_by_key(|&(id, n)| (std::cmp::Reverse(n), rank[&id]));
    let top: Vec<NodeId> = nodes
        .into_iter()
        .take(route.k())
        .map(|(id, _)| id)
        .collect();
    Ok(merge_paths(tree, &top)?)
}

/// How often routing selects each node of `category`'s tree over `samples`.
pub fn selection_frequency(
    category: &str,
    samples: &[&[f64]],
    trees: &CategoryTrees,
    store: &EmbeddingStore,
    route: &RoutingConfig,
    dist: &DistanceConfig,
) -> Result<BTreeMap<NodeId, usize>, BaselineError> {
    let tree = trees
        .get(category)
        .ok_or_else(|| BaselineError::UnknownCategory(category.to_string()))?;
    let mut counts = BTreeMap::new();
    for q in samples {
        for id in explain_in_tree(q, tree, store, route, dist)?
            .explanation
            .selected
        {
            *counts.entry(id).or_insert(0usize) += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingVector;
    use crate::tree::parse_tree;

    /// 8 nodes: r -> a(b, c), d(e), f, g
    fn eight() -> AttributeTree {
        parse_tree(
            r#"{"name":"r","children":[
                {"name":"a","support":["pa"],"children":[{"name":"b","support":["pb"]},{"name":"c","support":["pc"]}]},
                {"name":"d","support":["pd"],"children":[{"name":"e","support":["pe"]}]},
                {"name":"f","support":["pf"]},{"name":"g","support":["pg"]}]}"#,
        )
        .unwrap()
    }

    fn store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new();
        for (i, id) in ["pa", "pb", "pc", "pd", "pe", "pf", "pg"]
            .iter()
            .enumerate()
        {
            s.insert(EmbeddingVector::new(*id, None, vec![10.0 * i as f64]))
                .unwrap();
        }
        s
    }

    #[test]
    fn random_full_and_deterministic() {
        let t = eight();
        let full = random_baseline(&t, 7, 3).unwrap();
        assert!(full.tree.same_structure(&t));
        let a = random_baseline(&t, 3, 42).unwrap();
        let b = random_baseline(&t, 3, 42).unwrap();
        assert_eq!(a.selected, b.selected);
        assert!(a.tree.same_structure(&b.tree));
        a.tree.validate().unwrap();
        assert!(matches!(
            random_baseline(&t, 8, 0),
            Err(BaselineError::TooFewNodes { available: 7, .. })
        ));
    }

    #[test]
    fn random_selection_is_uniform() {
        let t = eight();
        let mut hits: BTreeMap<NodeId, usize> = BTreeMap::new();
        for seed in 0..1000 {
            for id in random_baseline(&t, 5, seed).unwrap().selected {
                *hits.entry(id).or_default() += 1;
            }
        }
        assert_eq!(hits.len(), 7);
        for (id, n) in hits {
            let freq = n as f64 / 1000.0;
            assert!((freq - 5.0 / 7.0).abs() <= 0.05, "node {id}: {freq}");
        }
    }

    #[test]
    fn constant_ignores_input() {
        let trees: CategoryTrees = [("r".to_string(), eight())].into();
        let a = constant_baseline("r", &trees).unwrap();
        let b = constant_baseline("r", &trees).unwrap();
        assert!(a.tree.same_structure(&b.tree));
        assert_eq!(a.len(), 8);
        assert!(matches!(
            constant_baseline("x", &trees),
            Err(BaselineError::UnknownCategory(_))
        ));
    }

    #[test]
    fn subtree_picks_most_frequent() {
        let trees: CategoryTrees = [("r".to_string(), eight())].into();
        let s = store();
        let route = RoutingConfig::new(2).unwrap();
        let dist = DistanceConfig::default();
        // near pb (10): selects b, then a or c; near pf (50): f then e or g
        let qs: Vec<Vec<f64>> = vec![vec![11.0], vec![12.0], vec![9.0], vec![51.0]];
        let refs: Vec<&[f64]> = qs.iter().map(Vec::as_slice).collect();
        let counts = selection_frequency("r", &refs, &trees, &s, &route, &dist).unwrap();
        let base = subtree_baseline("r", &refs, &trees, &s, &route, &dist).unwrap();
        let mut expected: Vec<(NodeId, usize)> = counts.into_iter().collect();
        expected.sort_by_key(|&(id, n)| (std::cmp::Reverse(n), id));
        let top: Vec<NodeId> = expected.iter().take(2).map(|&(id, _)| id).collect();
        assert_eq!(base.selected, top);

        // one sample: equals its own routed explanation
        let lone = subtree_baseline("r", &refs[..1], &trees, &s, &route, &dist).unwrap();
        let routed = explain_in_tree(refs[0], &trees["r"], &s, &route, &dist).unwrap();
        assert!(lone.tree.same_structure(&routed.explanation.tree));

        assert!(matches!(
            subtree_baseline("r", &[], &trees, &s, &route, &dist),
            Err(BaselineError::NoSamples(_))
        ));
        assert!(matches!(
            subtree_baseline("x", &refs, &trees, &s, &route, &dist),
            Err(BaselineError::UnknownCategory(_))
        ));
    }

    #[test]
    fn kind_round_trip() {
        for k in BaselineKind::ALL {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("trdec".parse::<BaselineKind>().is_err());
    }
}

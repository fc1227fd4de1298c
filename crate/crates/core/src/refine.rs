//! Tree refinement against training embeddings.
//!
//! Each iteration assigns every training sample to the nearest node of its
//! category tree, counts visits, prunes rarely visited branches, asks the
//! language model to expand the most visited nodes, and finally asks it to
//! tell apart attributes that several categories share.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    node_distance, DistanceConfig, EmbeddingError, EmbeddingStore, EmbeddingVector,
};
use crate::llm::{
    parse_attribute_response, render_prompt, LlmClient, LlmError, PromptKind, RequestKey,
};
use crate::routing::CategoryTrees;
use crate::tree::{AttributeTree, NodeId, NodeKind, TreeError};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("samples reference categories without a tree: {0:?}")]
    UnknownCategory(Vec<String>),
    #[error("tree {0:?} has no supported nodes")]
    NoSupportedNodes(String),
    #[error("support source failed for {category:?}/{node:?}: {message}")]
    Support {
        category: String,
        node: String,
        message: String,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    pub t_max: u32,
    /// Minimum number of nodes pruned per tree per iteration.
    pub prune_count: usize,
    pub grow_count: usize,
    /// Support embeddings requested for each grown node.
    pub k_support: usize,
    /// Always prune branches that received no visit at all.
    pub prune_unvisited: bool,
    /// Run common-node discrimination after growing.
    pub discriminate: bool,
    pub in_context_example: String,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            t_max: 5,
            prune_count: 1,
            grow_count: 1,
            k_support: 10,
            prune_unvisited: true,
            discriminate: true,
            in_context_example: crate::llm::DEFAULT_IN_CONTEXT_EXAMPLE.to_string(),
        }
    }
}

/// Where grown nodes get their support embeddings from.
pub trait SupportSource: Send + Sync {
    /// Up to `k` embeddings depicting `node` of `category`. Returned ids must
    /// not collide with embeddings already in the store unless they refer to
    /// the same vector.
    fn supports(
        &self,
        category: &str,
        node: &str,
        k: usize,
    ) -> Result<Vec<EmbeddingVector>, RefineError>;
}

/// Serves pre-extracted embeddings whose `label` is `category/node` or just
/// the node label, in file order.
#[derive(Debug, Clone, Default)]
pub struct StoreSupportSource {
    pool: EmbeddingStore,
}

impl StoreSupportSource {
    pub fn new(pool: EmbeddingStore) -> StoreSupportSource {
        StoreSupportSource { pool }
    }
}

impl SupportSource for StoreSupportSource {
    fn supports(
        &self,
        category: &str,
        node: &str,
        k: usize,
    ) -> Result<Vec<EmbeddingVector>, RefineError> {
        let qualified = format!("{category}/{node}");
        let pick = |want: &str| -> Vec<EmbeddingVector> {
            self.pool
                .iter()
                .filter(|e| e.label.as_deref() == Some(want))
                .take(k)
                .cloned()
                .collect()
        };
        let found = pick(&qualified);
        Ok(if found.is_empty() { pick(node) } else { found })
    }
}

/// Assignment of one category's training samples to tree nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTable {
    pub category: String,
    /// `(sample id, chosen node, distance)` in input order.
    pub assignments: Vec<(String, NodeId, f64)>,
    /// Visit count of every non-root node of the tree, zero included.
    pub counts: BTreeMap<NodeId, usize>,
}

impl AssignmentTable {
    pub fn empty(tree: &AttributeTree) -> AssignmentTable {
        AssignmentTable {
            category: tree.category().to_string(),
            assignments: Vec::new(),
            counts: tree
                .preorder()
                .into_iter()
                .filter(|&id| id != tree.root())
                .map(|id| (id, 0))
                .collect(),
        }
    }

    pub fn count(&self, id: NodeId) -> usize {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Visits summed over the subtree of every node.
    pub fn subtree_sums(&self, tree: &AttributeTree) -> BTreeMap<NodeId, usize> {
        let mut sums = BTreeMap::new();
        for id in tree.preorder().into_iter().rev() {
            let own = self.count(id);
            let below: usize = tree.children(id).iter().map(|c| sums[c]).sum();
            sums.insert(id, own + below);
        }
        sums
    }
}

/// Nearest supported non-root node to `q`; ties go to the earliest node in
/// preorder.
pub fn assign_sample(
    q: &[f64],
    tree: &AttributeTree,
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<(NodeId, f64), RefineError> {
    let mut best: Option<(NodeId, f64)> = None;
    for id in tree.preorder() {
        let node = tree.node(id).expect("preorder ids exist");
        if id == tree.root() || node.support.is_empty() {
            continue;
        }
        let d = node_distance(q, node, store, cfg)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((id, d));
        }
    }
    best.ok_or_else(|| RefineError::NoSupportedNodes(tree.category().to_string()))
}

/// A training sample: embedding plus its ground-truth category.
pub type TrainingSample<'a> = (&'a EmbeddingVector, &'a str);

/// Assigns every sample to its category's tree and counts visits. The result
/// has one table per tree, including trees that received no samples.
pub fn count_visits(
    samples: &[TrainingSample<'_>],
    trees: &CategoryTrees,
    store: &EmbeddingStore,
    cfg: &DistanceConfig,
) -> Result<BTreeMap<String, AssignmentTable>, RefineError> {
    let unknown: BTreeSet<String> = samples
        .iter()
        .filter(|(_, c)| !trees.contains_key(*c))
        .map(|(_, c)| c.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(RefineError::UnknownCategory(unknown.into_iter().collect()));
    }
    let assigned: Vec<(NodeId, f64)> = samples
        .par_iter()
        .map(|(e, c)| assign_sample(&e.vector, &trees[*c], store, cfg))
        .collect::<Result<_, _>>()?;
    let mut tables: BTreeMap<String, AssignmentTable> = trees
        .iter()
        .map(|(c, t)| (c.clone(), AssignmentTable::empty(t)))
        .collect();
    for ((e, c), (node, d)) in samples.iter().zip(assigned) {
        let table = tables.get_mut(*c).expect("category checked above");
        table.assignments.push((e.id.clone(), node, d));
        *table.counts.entry(node).or_default() += 1;
    }
    Ok(tables)
}

/// Removes rarely visited branches.
///
/// Every branch whose subtree received no visit is removed when
/// `prune_unvisited` is set. If fewer than `prune_count` nodes went that way,
/// further nodes are removed one at a time, choosing the smallest
/// subtree-summed visit count, then the smallest subtree, then the latest
/// preorder position. The root is never removed, and neither is the last
/// supported node. A category with no visits at all is left untouched.
pub fn prune(
    tree: &AttributeTree,
    table: &AssignmentTable,
    cfg: &RefinementConfig,
) -> Result<AttributeTree, RefineError> {
    if table.total() == 0 {
        return Ok(tree.clone());
    }
    let mut current = tree.clone();
    let mut removed = 0usize;
    if cfg.prune_unvisited {
        let sums = table.subtree_sums(&current);
        let zero: Vec<NodeId> = current
            .preorder()
            .into_iter()
            .filter(|&id| id != current.root() && sums[&id] == 0)
            .filter(|&id| {
                current
                    .parent(id)
                    .is_some_and(|p| p == current.root() || sums[&p] > 0)
            })
            .collect();
        for id in zero {
            if let Some(next) = prune_if_routable(&current, id)? {
                removed += 1;
                current = next;
            }
        }
    }
    while removed < cfg.prune_count {
        let sums = table.subtree_sums(&current);
        let rank = current.preorder_rank();
        let mut candidates: Vec<NodeId> = current
            .preorder()
            .into_iter()
            .filter(|&id| id != current.root())
            .collect();
        candidates.sort_by_key(|&id| {
            (
                sums[&id],
                current.subtree_ids(id).len(),
                std::cmp::Reverse(rank[&id]),
            )
        });
        let mut pruned = false;
        for id in candidates {
            if let Some(next) = prune_if_routable(&current, id)? {
                current = next;
                pruned = true;
                break;
            }
        }
        if !pruned {
            break;
        }
        removed += 1;
    }
    Ok(current)
}

fn prune_if_routable(
    tree: &AttributeTree,
    id: NodeId,
) -> Result<Option<AttributeTree>, RefineError> {
    let next = tree.without_subtrees(&[id])?;
    let supported = next
        .nodes()
        .any(|n| n.id != next.root() && !n.support.is_empty());
    Ok(supported.then_some(next))
}

/// The grow prompt for `node`; the root cannot be grown.
pub fn build_grow_prompt(
    tree: &AttributeTree,
    node: NodeId,
    class_name: &str,
    in_context_example: &str,
) -> Result<String, RefineError> {
    if node == tree.root() {
        return Err(TreeError::RootNode.into());
    }
    let label = tree.label(node).ok_or(TreeError::UnknownNode(node))?;
    let bindings = [("node", label), ("class", class_name)]
        .into_iter()
        .collect();
    Ok(render_prompt(
        PromptKind::Grow,
        &bindings,
        in_context_example,
    )?)
}

/// The discrimination prompt for a node label shared by two categories.
pub fn build_discriminate_prompt(
    node_label: &str,
    class_name: &str,
    other_class: &str,
    in_context_example: &str,
) -> Result<String, RefineError> {
    let bindings = [
        ("node", node_label),
        ("class", class_name),
        ("other", other_class),
    ]
    .into_iter()
    .collect();
    Ok(render_prompt(
        PromptKind::Discriminate,
        &bindings,
        in_context_example,
    )?)
}

/// What happened to one node during growth or discrimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub category: String,
    pub node: String,
    pub added: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renamed_to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Gives every node in `ids` (and their descendants) a support set: ids the
/// model already supplied are kept when the store knows them, anything else
/// is fetched from `source` and added to the store.
pub fn supply_supports(
    tree: AttributeTree,
    ids: &[NodeId],
    store: &mut EmbeddingStore,
    source: &dyn SupportSource,
    k: usize,
) -> Result<AttributeTree, RefineError> {
    let mut tree = tree;
    let all: Vec<NodeId> = ids.iter().flat_map(|&id| tree.subtree_ids(id)).collect();
    for id in all {
        let node = tree.node(id).expect("grafted ids exist");
        if !node.support.is_empty() && node.support.iter().all(|s| store.contains(s)) {
            continue;
        }
        let label = node.label.clone();
        let fetched = source.supports(tree.category(), &label, k)?;
        if fetched.is_empty() {
            log::warn!(
                "no support embeddings for {}; node stays unroutable",
                tree.label_path(id)
            );
        }
        let mut support = Vec::with_capacity(fetched.len());
        for e in fetched {
            match store.get(&e.id) {
                Some(existing) if existing.vector == e.vector => {}
                Some(_) => {
                    return Err(RefineError::Support {
                        category: tree.category().to_string(),
                        node: label,
                        message: format!(
                            "embedding id {:?} already holds a different vector",
                            e.id
                        ),
                    })
                }
                None => store.insert(e.clone())?,
            }
            support.push(e.id);
        }
        tree = tree.with_support(id, support)?;
    }
    Ok(tree)
}

/// Asks the model to expand the `grow_count` most visited nodes (visits > 0,
/// ties by preorder) and grafts the answers. Unparsable answers are logged
/// and skipped; a missing recording or a failed request is an error.
#[allow(clippy::too_many_arguments)]
pub fn grow(
    tree: &AttributeTree,
    table: &AssignmentTable,
    llm: &dyn LlmClient,
    source: &dyn SupportSource,
    store: &mut EmbeddingStore,
    cfg: &RefinementConfig,
    iteration: u32,
) -> Result<(AttributeTree, Vec<GrowthEvent>), RefineError> {
    let rank = tree.preorder_rank();
    let mut candidates: Vec<NodeId> = tree
        .preorder()
        .into_iter()
        .filter(|&id| id != tree.root() && table.count(id) > 0)
        .collect();
    candidates.sort_by_key(|&id| (std::cmp::Reverse(table.count(id)), rank[&id]));
    candidates.truncate(cfg.grow_count);

    let mut current = tree.clone();
    let mut events = Vec::new();
    for id in candidates {
        let label = current.label(id).expect("candidate exists").to_string();
        let prompt = build_grow_prompt(&current, id, current.category(), &cfg.in_context_example)?;
        let key = RequestKey::new(PromptKind::Grow, current.category(), &label, iteration);
        let response = llm.complete(&key, &prompt)?;
        let mut event = GrowthEvent {
            category: current.category().to_string(),
            node: label,
            added: Vec::new(),
            renamed_to: None,
            skipped: None,
        };
        match parse_attribute_response(&response) {
            Ok(fragment) => {
                let (next, added) = current.with_grafted(id, &fragment)?;
                event.added = added
                    .iter()
                    .map(|&a| next.label(a).unwrap().to_string())
                    .collect();
                current = supply_supports(next, &added, store, source, cfg.k_support)?;
            }
            Err(e) if e.is_unparsable_response() => {
                log::warn!("skipping growth of {}: {e}", current.label_path(id));
                event.skipped = Some(e.to_string());
            }
            Err(e) => return Err(e.into()),
        }
        events.push(event);
    }
    Ok((current, events))
}

/// Leaf-kind attribute labels that occur in more than one tree, with the
/// sorted list of categories containing each.
pub fn shared_labels(trees: &CategoryTrees) -> BTreeMap<String, Vec<String>> {
    let mut owners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (category, tree) in trees {
        let labels: BTreeSet<&str> = tree
            .nodes()
            .filter(|n| n.id != tree.root() && n.kind == NodeKind::Leaf)
            .map(|n| n.label.as_str())
            .collect();
        for l in labels {
            owners
                .entry(l.to_string())
                .or_default()
                .push(category.clone());
        }
    }
    owners.retain(|_, cs| cs.len() > 1);
    owners
}

/// For each attribute shared between categories, asks the model how it
/// differs in each category (against the first other owner). The answer's
/// root name becomes the node's new label and its children are grafted below.
pub fn discriminate(
    trees: &CategoryTrees,
    llm: &dyn LlmClient,
    source: &dyn SupportSource,
    store: &mut EmbeddingStore,
    cfg: &RefinementConfig,
    iteration: u32,
) -> Result<(CategoryTrees, Vec<GrowthEvent>), RefineError> {
    let mut out = trees.clone();
    let mut events = Vec::new();
    for (label, owners) in shared_labels(trees) {
        for category in &owners {
            let other = owners
                .iter()
                .find(|c| *c != category)
                .expect("shared by two or more");
            let tree = &out[category];
            let Some(id) = tree.find_label(&label) else {
                continue;
            };
            let prompt =
                build_discriminate_prompt(&label, category, other, &cfg.in_context_example)?;
            let key = RequestKey::new(PromptKind::Discriminate, category, &label, iteration);
            let response = llm.complete(&key, &prompt)?;
            let mut event = GrowthEvent {
                category: category.clone(),
                node: label.clone(),
                added: Vec::new(),
                renamed_to: None,
                skipped: None,
            };
            let fragment = match parse_attribute_response(&response) {
                Ok(f) => f,
                Err(e) if e.is_unparsable_response() => {
                    log::warn!("skipping discrimination of {category}/{label}: {e}");
                    event.skipped = Some(e.to_string());
                    events.push(event);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let mut next = tree.clone();
            let new_label = fragment.category();
            if new_label != label {
                match next.with_label(id, new_label) {
                    Ok(renamed) => {
                        next = renamed;
                        event.renamed_to = Some(new_label.to_string());
                    }
                    Err(e) => log::warn!("cannot rename {category}/{label}: {e}"),
                }
            }
            let (grafted, added) = next.with_grafted(id, &fragment)?;
            event.added = added
                .iter()
                .map(|&a| grafted.label(a).unwrap().to_string())
                .collect();
            let grafted = supply_supports(grafted, &added, store, source, cfg.k_support)?;
            out.insert(category.clone(), grafted);
            events.push(event);
        }
    }
    Ok((out, events))
}

/// Per-iteration log of a refinement run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u32,
    /// Visit counts by node label path, per category.
    pub visits: BTreeMap<String, BTreeMap<String, usize>>,
    pub pruned: BTreeMap<String, Vec<String>>,
    pub growth: Vec<GrowthEvent>,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub trees: CategoryTrees,
    pub history: Vec<IterationLog>,
}

/// Runs `t_max` rounds of count, prune, grow and discriminate.
pub fn refine(
    trees: &CategoryTrees,
    samples: &[TrainingSample<'_>],
    store: &mut EmbeddingStore,
    llm: &dyn LlmClient,
    source: &dyn SupportSource,
    dist: &DistanceConfig,
    cfg: &RefinementConfig,
) -> Result<RefineOutcome, RefineError> {
    let mut current = trees.clone();
    let mut history = Vec::new();
    for t in 0..cfg.t_max {
        let iteration = t + 1;
        let tables = count_visits(samples, &current, store, dist)?;
        let mut log = IterationLog {
            iteration,
            visits: BTreeMap::new(),
            pruned: BTreeMap::new(),
            growth: Vec::new(),
        };
        let mut next = CategoryTrees::new();
        for (category, tree) in &current {
            let table = &tables[category];
            log.visits.insert(
                category.clone(),
                table
                    .counts
                    .iter()
                    .map(|(&id, &c)| (tree.label_path(id), c))
                    .collect(),
            );
            let pruned = prune(tree, table, cfg)?;
            let gone: Vec<String> = tree
                .preorder()
                .into_iter()
                .filter(|&id| !pruned.contains(id))
                .map(|id| tree.label_path(id))
                .collect();
            log.pruned.insert(category.clone(), gone);
            let (grown, events) = grow(&pruned, table, llm, source, store, cfg, iteration)?;
            log.growth.extend(events);
            next.insert(category.clone(), grown);
        }
        if cfg.discriminate {
            let (discriminated, events) = discriminate(&next, llm, source, store, cfg, iteration)?;
            next = discriminated;
            log.growth.extend(events);
        }
        current = next
            .into_iter()
            .map(|(c, t)| (c, t.with_version(iteration)))
            .collect();
        history.push(log);
    }
    Ok(RefineOutcome {
        trees: current,
        history,
    })
}

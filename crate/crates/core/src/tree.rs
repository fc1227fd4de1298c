//! Attribute trees: the rooted, ordered, labeled trees that carry a category's
//! visual attributes, plus the JSON interchange format and the subtree
//! utilities the rest of the crate builds on.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

/// Identifier of a node, unique within one tree.
pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("malformed tree JSON at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid tree at {path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("operation not allowed on the root node")]
    RootNode,
}

/// Kind of an attribute node. The four header kinds group a category's
/// attributes; everything below them is a plain `Leaf` attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Root,
    Concepts,
    Substances,
    Attributes,
    Environments,
    Leaf,
}

impl NodeKind {
    pub const HEADERS: [NodeKind; 4] = [
        NodeKind::Concepts,
        NodeKind::Substances,
        NodeKind::Attributes,
        NodeKind::Environments,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Root => "root",
            NodeKind::Concepts => "Concepts",
            NodeKind::Substances => "Substances",
            NodeKind::Attributes => "Attributes",
            NodeKind::Environments => "Environments",
            NodeKind::Leaf => "leaf",
        }
    }

    /// Case-insensitive parse of the JSON `kind` strings.
    pub fn parse(s: &str) -> Option<NodeKind> {
        let lower = s.trim().to_ascii_lowercase();
        Some(match lower.as_str() {
            "root" => NodeKind::Root,
            "concepts" => NodeKind::Concepts,
            "substances" => NodeKind::Substances,
            "attributes" => NodeKind::Attributes,
            "environments" => NodeKind::Environments,
            "leaf" => NodeKind::Leaf,
            _ => return None,
        })
    }

    pub fn is_header(self) -> bool {
        NodeKind::HEADERS.contains(&self)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    pub label: String,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Ids of the support embeddings grounding this attribute. Empty when the
    /// node has no support set.
    pub support: Vec<String>,
}

/// A validated attribute tree for one category.
///
/// Values are immutable once built; every editing operation returns a new
/// tree. Node ids are stable across edits (pruning leaves gaps, growing
/// appends fresh ids), while preorder positions are recomputed.
#[derive(Debug, Clone)]
pub struct AttributeTree {
    category: String,
    nodes: BTreeMap<NodeId, TreeNode>,
    root: NodeId,
    version: u32,
}

impl AttributeTree {
    /// A single-node tree whose root is the category itself.
    pub fn singleton(category: &str) -> Result<AttributeTree, TreeError> {
        Ok(TreeBuilder::new(category)?.build())
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn with_version(mut self, version: u32) -> AttributeTree {
        self.version = version;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.children.len()).sum()
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.nodes.get(&id).map(|n| n.label.as_str())
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.nodes
            .get(&id)
            .map(|n| n.children.as_slice())
            .unwrap_or(&[])
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(&id).and_then(|n| n.parent)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children(id).is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values()
    }

    /// Node ids in preorder (parent before children, children left to right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.children(id).iter().rev().copied());
        }
        out
    }

    /// Preorder position of every node, used for deterministic tie-breaking.
    pub fn preorder_rank(&self) -> BTreeMap<NodeId, usize> {
        self.preorder()
            .into_iter()
            .enumerate()
            .map(|(rank, id)| (id, rank))
            .collect()
    }

    pub fn depth(&self, id: NodeId) -> Option<usize> {
        self.path_from_root(id).map(|p| p.len() - 1)
    }

    /// Ids on the path from the root down to `id`, inclusive.
    pub fn path_from_root(&self, id: NodeId) -> Option<Vec<NodeId>> {
        if !self.contains(id) {
            return None;
        }
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    /// All ids in the subtree rooted at `id` (preorder), including `id`.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        if !self.contains(id) {
            return out;
        }
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev().copied());
        }
        out
    }

    /// First node in preorder carrying `label`.
    pub fn find_label(&self, label: &str) -> Option<NodeId> {
        self.preorder()
            .into_iter()
            .find(|&id| self.label(id) == Some(label))
    }

    /// Child of `parent` with exactly this label.
    pub fn child_with_label(&self, parent: NodeId, label: &str) -> Option<NodeId> {
        self.children(parent)
            .iter()
            .copied()
            .find(|&c| self.label(c) == Some(label))
    }

    pub fn next_id(&self) -> NodeId {
        self.nodes.keys().next_back().map_or(0, |k| k + 1)
    }

    /// Structural equality: same category, and recursively the same labels,
    /// kinds, support ids and child order. Node ids are ignored.
    pub fn same_structure(&self, other: &AttributeTree) -> bool {
        fn eq(a: &AttributeTree, x: NodeId, b: &AttributeTree, y: NodeId) -> bool {
            let (nx, ny) = (&a.nodes[&x], &b.nodes[&y]);
            nx.label == ny.label
                && nx.kind == ny.kind
                && nx.support == ny.support
                && nx.children.len() == ny.children.len()
                && nx
                    .children
                    .iter()
                    .zip(&ny.children)
                    .all(|(&cx, &cy)| eq(a, cx, b, cy))
        }
        self.category == other.category && eq(self, self.root, other, other.root)
    }

    /// A copy of this tree with the given nodes and their whole subtrees
    /// removed. Removing the root is refused.
    pub fn without_subtrees(&self, ids: &[NodeId]) -> Result<AttributeTree, TreeError> {
        let mut out = self.clone();
        for &id in ids {
            if id == self.root {
                return Err(TreeError::RootNode);
            }
            if !self.contains(id) {
                return Err(TreeError::UnknownNode(id));
            }
            if !out.contains(id) {
                // already removed with an ancestor
                continue;
            }
            for n in out.subtree_ids(id) {
                out.nodes.remove(&n);
            }
            if let Some(p) = self.parent(id) {
                if let Some(pn) = out.nodes.get_mut(&p) {
                    pn.children.retain(|&c| c != id);
                }
            }
        }
        Ok(out)
    }

    /// Attaches a copy of `fragment`'s root children (and everything below
    /// them) under `parent`. Children whose label duplicates an existing
    /// sibling are dropped. Returns the new tree and the ids of the grafted
    /// top-level children, in order.
    pub fn with_grafted(
        &self,
        parent: NodeId,
        fragment: &AttributeTree,
    ) -> Result<(AttributeTree, Vec<NodeId>), TreeError> {
        if !self.contains(parent) {
            return Err(TreeError::UnknownNode(parent));
        }
        let mut out = self.clone();
        let mut added = Vec::new();
        for &child in fragment.children(fragment.root) {
            let label = &fragment.nodes[&child].label;
            if out.child_with_label(parent, label).is_some() {
                log::debug!("dropping duplicate sibling {label:?} under node {parent}");
                continue;
            }
            added.push(out.copy_subtree_from(fragment, child, parent, &mut Vec::new()));
        }
        Ok((out, added))
    }

    /// Attaches a copy of the whole of `sub` (its root included, demoted to a
    /// leaf-kind node) as the last child of `parent`. Returns the new tree and
    /// the `(id in sub, id in new tree)` pairs of every copied node.
    pub fn with_attached(
        &self,
        parent: NodeId,
        sub: &AttributeTree,
    ) -> Result<(AttributeTree, Vec<(NodeId, NodeId)>), TreeError> {
        if !self.contains(parent) {
            return Err(TreeError::UnknownNode(parent));
        }
        if self.child_with_label(parent, sub.category()).is_some() {
            return Err(TreeError::Invalid {
                path: self.label_path(parent),
                reason: format!("duplicate child label {:?}", sub.category()),
            });
        }
        let mut out = self.clone();
        let mut map = Vec::with_capacity(sub.len());
        out.copy_subtree_from(sub, sub.root, parent, &mut map);
        Ok((out, map))
    }

    fn copy_subtree_from(
        &mut self,
        src: &AttributeTree,
        src_id: NodeId,
        parent: NodeId,
        map: &mut Vec<(NodeId, NodeId)>,
    ) -> NodeId {
        let id = self.next_id();
        let s = &src.nodes[&src_id];
        let kind = if s.kind == NodeKind::Root {
            NodeKind::Leaf
        } else {
            s.kind
        };
        self.nodes.insert(
            id,
            TreeNode {
                id,
                label: s.label.clone(),
                kind,
                parent: Some(parent),
                children: Vec::new(),
                support: s.support.clone(),
            },
        );
        self.nodes.get_mut(&parent).unwrap().children.push(id);
        map.push((src_id, id));
        for &c in &s.children {
            self.copy_subtree_from(src, c, id, map);
        }
        id
    }

    /// A copy with `id` renamed. Fails if a sibling already carries the label.
    pub fn with_label(&self, id: NodeId, label: &str) -> Result<AttributeTree, TreeError> {
        let label = clean_label(label, &format!("node {id}"))?;
        if id == self.root {
            return Err(TreeError::RootNode);
        }
        let parent = self.parent(id).ok_or(TreeError::UnknownNode(id))?;
        if let Some(other) = self.child_with_label(parent, &label) {
            if other != id {
                return Err(TreeError::Invalid {
                    path: self.label_path(parent),
                    reason: format!("duplicate sibling label {label:?}"),
                });
            }
        }
        let mut out = self.clone();
        out.nodes.get_mut(&id).unwrap().label = label;
        Ok(out)
    }

    /// A copy with the support ids of `id` replaced.
    pub fn with_support(
        &self,
        id: NodeId,
        support: Vec<String>,
    ) -> Result<AttributeTree, TreeError> {
        let mut out = self.clone();
        out.nodes
            .get_mut(&id)
            .ok_or(TreeError::UnknownNode(id))?
            .support = support;
        Ok(out)
    }

    /// Human-readable path of labels from the root, e.g. `dog/Attributes/tail`.
    pub fn label_path(&self, id: NodeId) -> String {
        self.path_from_root(id)
            .unwrap_or_default()
            .iter()
            .map(|&n| self.nodes[&n].label.as_str())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Copy with ids renumbered 0.. in preorder.
    pub fn renumbered(&self) -> AttributeTree {
        let rank = self.preorder_rank();
        let nodes = self
            .nodes
            .values()
            .map(|n| {
                let id = rank[&n.id];
                (
                    id,
                    TreeNode {
                        id,
                        label: n.label.clone(),
                        kind: n.kind,
                        parent: n.parent.map(|p| rank[&p]),
                        children: n.children.iter().map(|c| rank[c]).collect(),
                        support: n.support.clone(),
                    },
                )
            })
            .collect();
        AttributeTree {
            category: self.category.clone(),
            nodes,
            root: 0,
            version: self.version,
        }
    }

    pub fn to_json_value(&self) -> Value {
        fn node_value(t: &AttributeTree, id: NodeId) -> Value {
            let n = &t.nodes[&id];
            let mut obj = Map::new();
            obj.insert("name".into(), Value::String(n.label.clone()));
            obj.insert("kind".into(), Value::String(n.kind.as_str().into()));
            if !n.support.is_empty() {
                obj.insert(
                    "support".into(),
                    Value::Array(n.support.iter().cloned().map(Value::String).collect()),
                );
            }
            if !n.children.is_empty() {
                obj.insert(
                    "children".into(),
                    Value::Array(n.children.iter().map(|&c| node_value(t, c)).collect()),
                );
            }
            Value::Object(obj)
        }
        node_value(self, self.root)
    }

    /// Compact single-line JSON.
    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value())
            .expect("tree JSON is always serializable")
    }

    /// Checks the structural invariants: single root, parent/child links
    /// agree, every node reachable, no duplicate siblings.
    pub fn validate(&self) -> Result<(), TreeError> {
        let invalid = |path: String, reason: &str| TreeError::Invalid {
            path,
            reason: reason.to_string(),
        };
        let root = self
            .nodes
            .get(&self.root)
            .ok_or_else(|| invalid("/".into(), "missing root"))?;
        if root.parent.is_some() || root.kind != NodeKind::Root {
            return Err(invalid(
                root.label.clone(),
                "root must have kind root and no parent",
            ));
        }
        if root.label != self.category {
            return Err(invalid(
                root.label.clone(),
                "root label must equal the category",
            ));
        }
        let order = self.preorder();
        let unique: HashSet<_> = order.iter().collect();
        if unique.len() != order.len() || order.len() != self.nodes.len() {
            return Err(invalid(
                self.category.clone(),
                "nodes are not a tree reachable from root",
            ));
        }
        if self.edge_count() + 1 != self.nodes.len() {
            return Err(invalid(self.category.clone(), "edge count is not |V| - 1"));
        }
        for n in self.nodes.values() {
            if n.label.trim().is_empty() || n.label.trim() != n.label {
                return Err(invalid(
                    self.label_path(n.id),
                    "label must be nonempty and trimmed",
                ));
            }
            if n.id != self.root && n.kind == NodeKind::Root {
                return Err(invalid(
                    self.label_path(n.id),
                    "only the root may have kind root",
                ));
            }
            let mut seen = HashSet::new();
            for &c in &n.children {
                let child = self
                    .nodes
                    .get(&c)
                    .ok_or_else(|| invalid(self.label_path(n.id), "dangling child id"))?;
                if child.parent != Some(n.id) {
                    return Err(invalid(self.label_path(c), "parent link mismatch"));
                }
                if !seen.insert(child.label.as_str()) {
                    return Err(invalid(
                        self.label_path(n.id),
                        &format!("duplicate child label {:?}", child.label),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for AttributeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

fn clean_label(label: &str, path: &str) -> Result<String, TreeError> {
    let trimmed = label.trim();
    if trimmed.is_empty() {
        return Err(TreeError::Invalid {
            path: path.to_string(),
            reason: "empty label".into(),
        });
    }
    Ok(trimmed.to_string())
}

/// Incremental construction of an [`AttributeTree`], enforcing the label and
/// sibling rules as nodes are added.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    tree: AttributeTree,
}

impl TreeBuilder {
    pub fn new(category: &str) -> Result<TreeBuilder, TreeError> {
        let label = clean_label(category, "$")?;
        let mut nodes = BTreeMap::new();
        nodes.insert(
            0,
            TreeNode {
                id: 0,
                label: label.clone(),
                kind: NodeKind::Root,
                parent: None,
                children: Vec::new(),
                support: Vec::new(),
            },
        );
        Ok(TreeBuilder {
            tree: AttributeTree {
                category: label,
                nodes,
                root: 0,
                version: 0,
            },
        })
    }

    pub fn root(&self) -> NodeId {
        self.tree.root
    }

    pub fn child(
        &mut self,
        parent: NodeId,
        label: &str,
        kind: NodeKind,
    ) -> Result<NodeId, TreeError> {
        let path = format!("{}/{}", self.tree.label_path(parent), label.trim());
        let label = clean_label(label, &path)?;
        if !self.tree.contains(parent) {
            return Err(TreeError::UnknownNode(parent));
        }
        if kind == NodeKind::Root {
            return Err(TreeError::Invalid {
                path,
                reason: "only the root may have kind root".into(),
            });
        }
        if self.tree.child_with_label(parent, &label).is_some() {
            return Err(TreeError::Invalid {
                path,
                reason: format!("duplicate child label {label:?}"),
            });
        }
        let id = self.tree.next_id();
        self.tree.nodes.insert(
            id,
            TreeNode {
                id,
                label,
                kind,
                parent: Some(parent),
                children: Vec::new(),
                support: Vec::new(),
            },
        );
        self.tree.nodes.get_mut(&parent).unwrap().children.push(id);
        Ok(id)
    }

    pub fn support(&mut self, id: NodeId, support: Vec<String>) -> Result<&mut Self, TreeError> {
        self.tree
            .nodes
            .get_mut(&id)
            .ok_or(TreeError::UnknownNode(id))?
            .support = support;
        Ok(self)
    }

    pub fn version(&mut self, version: u32) -> &mut Self {
        self.tree.version = version;
        self
    }

    pub fn build(self) -> AttributeTree {
        self.tree
    }
}

/// Parses the tree JSON interchange format. Node ids are assigned in
/// preorder and child order follows the input arrays.
pub fn parse_tree(json_text: &str) -> Result<AttributeTree, TreeError> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| TreeError::Syntax {
        offset: byte_offset(json_text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    tree_from_value(&value)
}

/// Builds a tree from an already-parsed JSON value.
pub fn tree_from_value(value: &Value) -> Result<AttributeTree, TreeError> {
    let obj = value.as_object().ok_or_else(|| TreeError::Invalid {
        path: "$".into(),
        reason: "tree must be a JSON object".into(),
    })?;
    let name = field_name(obj, "$")?;
    let mut builder = TreeBuilder::new(&name)?;
    if let Some(kind) = field_kind(obj, "$")? {
        if kind != NodeKind::Root {
            return Err(TreeError::Invalid {
                path: "$.kind".into(),
                reason: format!("root node cannot have kind {kind}"),
            });
        }
    }
    let root = builder.root();
    builder.support(root, field_support(obj, "$")?)?;
    ingest_children(&mut builder, root, obj, "$")?;
    Ok(builder.build())
}

fn ingest_children(
    builder: &mut TreeBuilder,
    parent: NodeId,
    obj: &Map<String, Value>,
    path: &str,
) -> Result<(), TreeError> {
    let children = match obj.get("children") {
        None | Some(Value::Null) => return Ok(()),
        Some(Value::Array(a)) => a,
        Some(_) => {
            return Err(TreeError::Invalid {
                path: format!("{path}.children"),
                reason: "children must be an array".into(),
            })
        }
    };
    for (i, child) in children.iter().enumerate() {
        let cpath = format!("{path}.children[{i}]");
        let cobj = child.as_object().ok_or_else(|| TreeError::Invalid {
            path: cpath.clone(),
            reason: "child must be a JSON object".into(),
        })?;
        let name = field_name(cobj, &cpath)?;
        let kind = field_kind(cobj, &cpath)?.unwrap_or(NodeKind::Leaf);
        if kind == NodeKind::Root {
            return Err(TreeError::Invalid {
                path: format!("{cpath}.kind"),
                reason: "only the root may have kind root".into(),
            });
        }
        if builder.tree.child_with_label(parent, name.trim()).is_some() {
            return Err(TreeError::Invalid {
                path: format!("{cpath}.name"),
                reason: format!("duplicate child label {:?}", name.trim()),
            });
        }
        let id = builder.child(parent, &name, kind).map_err(|e| match e {
            TreeError::Invalid { reason, .. } => TreeError::Invalid {
                path: format!("{cpath}.name"),
                reason,
            },
            other => other,
        })?;
        builder.support(id, field_support(cobj, &cpath)?)?;
        ingest_children(builder, id, cobj, &cpath)?;
    }
    Ok(())
}

fn field_name(obj: &Map<String, Value>, path: &str) -> Result<String, TreeError> {
    match obj.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(TreeError::Invalid {
            path: format!("{path}.name"),
            reason: "empty label".into(),
        }),
        Some(_) => Err(TreeError::Invalid {
            path: format!("{path}.name"),
            reason: "name must be a string".into(),
        }),
        None => Err(TreeError::Invalid {
            path: format!("{path}.name"),
            reason: "missing required field name".into(),
        }),
    }
}

fn field_kind(obj: &Map<String, Value>, path: &str) -> Result<Option<NodeKind>, TreeError> {
    match obj.get("kind") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => NodeKind::parse(s)
            .map(Some)
            .ok_or_else(|| TreeError::Invalid {
                path: format!("{path}.kind"),
                reason: format!("unknown kind {s:?}"),
            }),
        Some(_) => Err(TreeError::Invalid {
            path: format!("{path}.kind"),
            reason: "kind must be a string".into(),
        }),
    }
}

fn field_support(obj: &Map<String, Value>, path: &str) -> Result<Vec<String>, TreeError> {
    match obj.get("support") {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| TreeError::Invalid {
                        path: format!("{path}.support[{i}]"),
                        reason: "support ids must be strings".into(),
                    })
            })
            .collect(),
        Some(_) => Err(TreeError::Invalid {
            path: format!("{path}.support"),
            reason: "support must be an array".into(),
        }),
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Serializes a tree to its compact JSON form.
pub fn serialize_tree(tree: &AttributeTree) -> String {
    tree.to_json()
}

/// An explanation for one sample: a subtree of a category tree that is the
/// union of root paths to the selected nodes.
#[derive(Debug, Clone)]
pub struct ExplanationTree {
    pub tree: AttributeTree,
    pub source_sample: Option<String>,
    /// Selected node ids (in the ids of the source tree), in selection order.
    pub selected: Vec<NodeId>,
}

impl ExplanationTree {
    pub fn with_sample(mut self, sample: impl Into<String>) -> ExplanationTree {
        self.source_sample = Some(sample.into());
        self
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }
}

/// Minimal subtree of `tree` containing the root and every node in
/// `node_ids`. Node ids, order and support are inherited from `tree`.
pub fn merge_paths(
    tree: &AttributeTree,
    node_ids: &[NodeId],
) -> Result<ExplanationTree, TreeError> {
    let mut keep = BTreeSet::new();
    for &id in node_ids {
        let path = tree.path_from_root(id).ok_or(TreeError::UnknownNode(id))?;
        keep.extend(path);
    }
    keep.insert(tree.root);
    let nodes = keep
        .iter()
        .map(|&id| {
            let n = &tree.nodes[&id];
            let mut n = n.clone();
            n.children.retain(|c| keep.contains(c));
            (id, n)
        })
        .collect();
    Ok(ExplanationTree {
        tree: AttributeTree {
            category: tree.category.clone(),
            nodes,
            root: tree.root,
            version: tree.version,
        },
        source_sample: None,
        selected: node_ids.to_vec(),
    })
}

/// Every connected node set of `tree` with at most `max_nodes` nodes.
///
/// Sets are ordered by size, then lexicographically by the preorder ranks of
/// their members.
pub fn enumerate_subtrees(tree: &AttributeTree, max_nodes: usize) -> Vec<BTreeSet<NodeId>> {
    if max_nodes == 0 {
        return Vec::new();
    }
    let order = tree.preorder();
    let rank = tree.preorder_rank();
    // connected sets whose topmost node is `id`, keyed by node, built bottom-up
    let mut rooted: BTreeMap<NodeId, Vec<Vec<NodeId>>> = BTreeMap::new();
    for &id in order.iter().rev() {
        let mut sets: Vec<Vec<NodeId>> = vec![vec![id]];
        for &c in tree.children(id) {
            let child_sets = &rooted[&c];
            let mut extended = Vec::new();
            for base in &sets {
                for cs in child_sets {
                    if base.len() + cs.len() <= max_nodes {
                        let mut merged = base.clone();
                        merged.extend_from_slice(cs);
                        extended.push(merged);
                    }
                }
            }
            sets.extend(extended);
        }
        rooted.insert(id, sets);
    }
    let mut all: Vec<(usize, Vec<usize>, BTreeSet<NodeId>)> = rooted
        .into_values()
        .flatten()
        .map(|s| {
            let mut ranks: Vec<usize> = s.iter().map(|id| rank[id]).collect();
            ranks.sort_unstable();
            (s.len(), ranks, s.into_iter().collect())
        })
        .collect();
    all.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    all.into_iter().map(|(_, _, s)| s).collect()
}

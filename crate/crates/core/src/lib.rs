//! Concept-tree explanations for vision-model embeddings.
//!
//! Each category owns an [`AttributeTree`](tree::AttributeTree) of textual
//! visual attributes whose nodes are grounded by support embeddings. Trees
//! are refined against training embeddings ([`refine`]), test embeddings are
//! routed to their nearest nodes to produce per-sample explanation subtrees
//! ([`routing`]), and explanations are scored with tree-similarity and
//! faithfulness metrics ([`metrics`]).

pub mod baselines;
pub mod embedding;
pub mod llm;
pub mod metrics;
pub mod refine;
pub mod routing;
pub mod synthetic;
pub mod tree;

pub use embedding::{DistanceConfig, EmbeddingStore, EmbeddingVector};
pub use tree::{AttributeTree, ExplanationTree, NodeId, NodeKind};

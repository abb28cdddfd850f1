//! The shared search engine.
//!
//! Every node is a joint state: a program plus the model that will propose
//! from it. One trial selects a leaf with the model-aware tree policy, asks
//! that leaf's model for a joint proposal, expands one child, rolls it out
//! and backpropagates the reward. When a small model produces a regression
//! on a path that already holds an earlier small-model regression, the new
//! child is pruned and the largest model re-expands the same parent.

mod engine;
mod tree;

pub use engine::{
    rollout, run_search, ProposerPool, SampleKind, SampleRecord, SearchConfig, SearchResult, TreeSummary,
    DEFAULT_ROLLOUT_DEPTH,
};
pub use tree::{NodeId, SearchNode, SearchTree};

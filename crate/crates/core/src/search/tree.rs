use rand::RngCore;
use serde::Serialize;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::{select_child, NodeStats, PolicyParams};
use crate::program::{ModelIdx, ModelSet, Mutator, ProgramState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

/// A joint (program, acting model) state in the search tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub state: ProgramState,
    /// Model that proposes when this node is expanded.
    pub acting_model: ModelIdx,
    /// Model whose proposal created this node; `None` for the root.
    pub expanded_by: Option<ModelIdx>,
    /// Transformations on the edge from the parent.
    pub edge: Vec<Mutator>,
    pub stats: NodeStats,
    pub children: Vec<NodeId>,
    /// Program costs more than the parent's.
    pub is_regression: bool,
    /// Tombstoned by course alteration: never selected, never updated.
    pub pruned: bool,
    pub depth: usize,
}

/// Arena-backed search tree. Node ids are indices and are never reused.
#[derive(Debug, Clone, Serialize)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    branching: usize,
}

impl SearchTree {
    pub fn new(root_state: ProgramState, root_cost: f64, root_model: ModelIdx, branching: usize) -> Self {
        let root = SearchNode {
            id: NodeId(0),
            parent: None,
            state: root_state,
            acting_model: root_model,
            expanded_by: None,
            edge: Vec::new(),
            stats: NodeStats::new(root_cost),
            children: Vec::new(),
            is_regression: false,
            pruned: false,
            depth: 0,
        };
        SearchTree {
            nodes: vec![root],
            branching,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn live_children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id.0]
            .children
            .iter()
            .copied()
            .filter(|c| !self.nodes[c.0].pruned)
    }

    /// Root-to-node path.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cursor = id;
        while let Some(p) = self.nodes[cursor.0].parent {
            path.push(p);
            cursor = p;
        }
        path.reverse();
        path
    }

    /// Descends by MA-UCT among live children until a node can still take a
    /// child or sits at the horizon. `phis[m]` is the size prior of model `m`.
    pub fn select_leaf(&self, params: &PolicyParams, phis: &[f64], rng: &mut dyn RngCore) -> Vec<NodeId> {
        let mut path = vec![self.root()];
        loop {
            let current = *path.last().expect("path starts at root");
            let node = self.node(current);
            if node.state.at_horizon() {
                return path;
            }
            let live: Vec<NodeId> = self.live_children(current).collect();
            if live.len() < self.branching {
                return path;
            }
            let scored: Vec<(NodeStats, f64)> = live
                .iter()
                .map(|&c| {
                    let child = self.node(c);
                    (child.stats, phis[child.acting_model.0])
                })
                .collect();
            let pick = select_child(&scored, node.stats.visits, params, rng)
                .expect("branching >= 1 so live children exist");
            path.push(live[pick]);
        }
    }

    /// Appends a child for `mutators` under `leaf`, enforcing the branching bound.
    pub fn expand(
        &mut self,
        leaf: NodeId,
        mutators: &[Mutator],
        next_model: ModelIdx,
        env: &dyn Environment,
    ) -> Result<NodeId> {
        let live = self.live_children(leaf).count();
        if live >= self.branching {
            return Err(Error::BranchingFull {
                branching: self.branching,
            });
        }
        let expanded_by = self.node(leaf).acting_model;
        self.attach(leaf, mutators, next_model, expanded_by, env)
    }

    /// Appends a child without the branching check; used for course-alteration
    /// replacements, which take over the slot of the pruned child.
    pub(crate) fn attach(
        &mut self,
        leaf: NodeId,
        mutators: &[Mutator],
        next_model: ModelIdx,
        expanded_by: ModelIdx,
        env: &dyn Environment,
    ) -> Result<NodeId> {
        let parent = self.node(leaf);
        if parent.state.at_horizon() {
            return Err(Error::HorizonExceeded {
                horizon: parent.state.horizon(),
            });
        }
        let state = mutators
            .iter()
            .try_fold(parent.state.clone(), |s, &m| s.apply(m))?;
        let cost = env.cost(&state);
        let id = NodeId(self.nodes.len());
        let node = SearchNode {
            id,
            parent: Some(leaf),
            is_regression: cost > parent.stats.raw_cost,
            depth: parent.depth + 1,
            state,
            acting_model: next_model,
            expanded_by: Some(expanded_by),
            edge: mutators.to_vec(),
            stats: NodeStats::new(cost),
            children: Vec::new(),
            pruned: false,
        };
        self.nodes.push(node);
        self.nodes[leaf.0].children.push(id);
        Ok(id)
    }

    /// Adds one visit and `reward` to every node on `path`.
    pub fn backpropagate(&mut self, path: &[NodeId], reward: f64) {
        for id in path {
            let stats = &mut self.nodes[id.0].stats;
            stats.visits += 1;
            stats.cumulative_reward += reward;
        }
    }

    pub fn prune(&mut self, id: NodeId) {
        self.nodes[id.0].pruned = true;
    }

    /// Persistent small-model regression: `child` is a regression proposed by
    /// a model other than the largest, and some earlier edge on `path` (root
    /// excluded, adjacency not required) was as well.
    pub fn check_course_alteration(&self, path: &[NodeId], child: NodeId, models: &ModelSet) -> bool {
        let small_regression = |id: NodeId| {
            let node = self.node(id);
            node.is_regression && node.expanded_by.is_some_and(|m| !models.is_largest(m))
        };
        small_regression(child) && path.iter().skip(1).any(|&id| small_regression(id))
    }

    pub fn pruned_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.pruned).count()
    }
}

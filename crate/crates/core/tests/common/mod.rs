#![allow(dead_code)]

use std::collections::HashMap;

use colt_core::env::{Environment, SynthKernel};
use colt_core::program::{ModelDescriptor, ModelSet};
use colt_core::proposers::{Proposer, ProposalRequest, ScriptedProfile, ScriptedProposer};
use colt_core::search::{NodeId, ProposerPool, SampleKind, SearchResult};
use rand::RngCore;

pub fn scripted(profile: ScriptedProfile) -> Box<dyn Proposer> {
    Box::new(ScriptedProposer::new(profile).unwrap())
}

pub fn pool(entries: Vec<(&str, Box<dyn Proposer>)>) -> ProposerPool {
    entries.into_iter().map(|(id, p)| (id.to_string(), p)).collect()
}

pub fn models(entries: &[(&str, f64)]) -> ModelSet {
    ModelSet::new(entries.iter().map(|(id, p)| ModelDescriptor::new(*id, *p)).collect()).unwrap()
}

pub fn strong() -> ScriptedProfile {
    ScriptedProfile { greedy_prob: 0.9, error_rate: 0.02, self_bias: 0.5 }
}

pub fn weak() -> ScriptedProfile {
    ScriptedProfile { greedy_prob: 0.4, error_rate: 0.1, self_bias: 0.5 }
}

/// Small model that always walks into regressions: Unroll while untiled,
/// then CacheWrite before vectorizing, otherwise re-tiles to 4. Always
/// hands control to itself.
pub struct RegressingProposer {
    pub id: String,
}

impl Proposer for RegressingProposer {
    fn respond(&mut self, req: &ProposalRequest<'_>, _rng: &mut dyn RngCore) -> colt_core::Result<String> {
        let f = req.ctx.state.features();
        let pick = if !f.unrolled && f.tile_factor == 1 {
            "Unroll"
        } else if !f.cached_write && !f.vectorized {
            "CacheWrite"
        } else {
            "Tile(4)"
        };
        Ok(format!(r#"{{"transformations": ["{pick}"], "next_model": "{}"}}"#, self.id))
    }
}

/// Replays every non-pruned sample's reward along its root path and
/// compares with the stored node statistics.
pub fn replay_reconciles(result: &SearchResult) -> Result<(), String> {
    let tree = &result.tree;
    let mut visits: HashMap<NodeId, u64> = HashMap::new();
    let mut rewards: HashMap<NodeId, f64> = HashMap::new();
    for s in result.samples.iter().filter(|s| !s.pruned) {
        for id in tree.path_to(NodeId(s.node)) {
            *visits.entry(id).or_default() += 1;
            *rewards.entry(id).or_default() += s.rollout_reward;
        }
    }
    for node in tree.nodes() {
        let v = visits.get(&node.id).copied().unwrap_or(0);
        let q = rewards.get(&node.id).copied().unwrap_or(0.0);
        if node.stats.visits != v {
            return Err(format!("node {:?}: visits {} vs replay {}", node.id, node.stats.visits, v));
        }
        if (node.stats.cumulative_reward - q).abs() > 1e-9 {
            return Err(format!("node {:?}: Q {} vs replay {}", node.id, node.stats.cumulative_reward, q));
        }
        if node.pruned && (node.stats.visits != 0 || node.stats.cumulative_reward != 0.0) {
            return Err(format!("pruned node {:?} has stats", node.id));
        }
    }
    Ok(())
}

/// Structural invariants every finished run must satisfy.
pub fn check_tree_invariants(result: &SearchResult, trials: usize) -> Result<(), String> {
    let tree = &result.tree;
    let b = tree.branching();
    // Backprops that end at each node.
    let mut terminating: HashMap<usize, u64> = HashMap::new();
    for s in result.samples.iter().filter(|s| !s.pruned) {
        *terminating.entry(s.node).or_default() += 1;
    }
    for node in tree.nodes() {
        let live: Vec<NodeId> = tree.live_children(node.id).collect();
        if live.len() > b {
            return Err(format!("node {:?} has {} live children > B={b}", node.id, live.len()));
        }
        if node.pruned {
            continue;
        }
        let child_sum: u64 = live.iter().map(|c| tree.node(*c).stats.visits).sum();
        let own = terminating.get(&node.id.0).copied().unwrap_or(0);
        if node.stats.visits != child_sum + own {
            return Err(format!(
                "visit conservation fails at {:?}: {} != {} + {}",
                node.id, node.stats.visits, child_sum, own
            ));
        }
        if let Some(p) = node.parent {
            let parent_cost = tree.node(p).stats.raw_cost;
            if node.is_regression != (node.stats.raw_cost > parent_cost) {
                return Err(format!("regression flag inconsistent at {:?}", node.id));
            }
        }
        if node.stats.cumulative_reward > node.stats.visits as f64 + 1e-9 {
            return Err(format!("Q > N at {:?}", node.id));
        }
    }
    let backprops = result.samples.iter().filter(|s| !s.pruned).count() as u64;
    let root = tree.node(tree.root());
    if root.stats.visits != backprops {
        return Err(format!("root visits {} != backprops {}", root.stats.visits, backprops));
    }
    let alterations = result.samples.iter().filter(|s| s.kind == SampleKind::Alteration).count();
    if result.samples.len() != trials + alterations {
        return Err(format!(
            "sample accounting: {} logged != {} trials + {} alterations",
            result.samples.len(),
            trials,
            alterations
        ));
    }
    if result.tree_summary.pruned != alterations {
        return Err("pruned count differs from alteration count".into());
    }
    for w in result.samples.windows(2) {
        if w[1].best_speedup < w[0].best_speedup {
            return Err("best-so-far curve decreased".into());
        }
    }
    replay_reconciles(result)
}

pub fn env(horizon: usize) -> SynthKernel {
    SynthKernel::new(1000.0, horizon).unwrap()
}

pub fn speedup_of(env: &SynthKernel, result: &SearchResult) -> f64 {
    env.speedup(&result.best_state)
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tree::{NodeId, SearchTree};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::{phi_small, PolicyParams};
use crate::program::{ModelIdx, ModelSet, ProgramState};
use crate::proposers::{
    parse_proposal, JointProposal, LocalModel, ModelSnapshot, ModelStats, NodeSummary, ProposalRequest,
    Proposer, ProposerContext,
};

pub const DEFAULT_ROLLOUT_DEPTH: usize = 4;

/// Proposers keyed by model id.
pub type ProposerPool = BTreeMap<String, Box<dyn Proposer>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Expansion iterations to run.
    pub trials: usize,
    pub horizon: usize,
    pub rollout_depth: usize,
    pub policy: PolicyParams,
    pub model_set: ModelSet,
    pub root_model: ModelIdx,
    pub seed: u64,
    pub course_alteration_enabled: bool,
}

impl SearchConfig {
    /// Defaults with the largest model acting at the root.
    pub fn new(model_set: ModelSet, trials: usize, horizon: usize, seed: u64) -> Self {
        SearchConfig {
            trials,
            horizon,
            rollout_depth: DEFAULT_ROLLOUT_DEPTH,
            policy: PolicyParams::default(),
            root_model: model_set.largest(),
            model_set,
            seed,
            course_alteration_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Regular expansion by the leaf's acting model.
    Expansion,
    /// Replacement expansion by the largest model after pruning.
    Alteration,
    /// The selected leaf sits at the horizon; it is re-evaluated, not expanded.
    Terminal,
}

/// One evaluated sample; one line of the sample log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub sample: usize,
    pub trial: usize,
    pub kind: SampleKind,
    /// Tree depth of the expanded leaf.
    pub depth: usize,
    /// Node that was created (or re-evaluated, for terminal samples).
    pub node: usize,
    pub acting_model: String,
    pub mutators: Vec<String>,
    pub next_model: Option<String>,
    pub child_cost: f64,
    pub child_speedup: f64,
    pub rollout_speedup: f64,
    pub rollout_reward: f64,
    pub improved: bool,
    pub errors: u32,
    pub regression: bool,
    pub alteration: bool,
    /// The child was pruned and its reward discarded.
    pub pruned: bool,
    pub best_speedup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeSummary {
    pub nodes: usize,
    pub pruned: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_state: ProgramState,
    pub best_speedup: f64,
    pub samples: Vec<SampleRecord>,
    pub final_stats: Vec<ModelSnapshot>,
    pub tree_summary: TreeSummary,
    pub tree: SearchTree,
    /// Set when a proposer became unavailable and the run stopped early.
    pub incomplete: Option<String>,
}

impl SearchResult {
    pub fn alterations(&self) -> usize {
        self.samples.iter().filter(|s| s.alteration).count()
    }
}

/// Applies up to `depth` uniformly random valid mutators.
pub fn rollout(state: &ProgramState, depth: usize, env: &dyn Environment, rng: &mut dyn RngCore) -> (ProgramState, f64) {
    let mut current = state.clone();
    for _ in 0..depth {
        let Some(&m) = current.valid_mutators().choose(rng) else {
            break;
        };
        current = current.apply(m).expect("valid mutators apply");
    }
    let reward = env.reward(&current);
    (current, reward)
}

/// Runs the collaborative search for `config.trials` iterations.
pub fn run_search(env: &dyn Environment, proposers: &mut ProposerPool, config: &SearchConfig) -> Result<SearchResult> {
    let mut search = Search::new(env, proposers, config)?;
    for trial in 0..config.trials {
        if let Err(e) = search.trial(trial) {
            match e {
                Error::ProposerUnavailable(reason) => {
                    search.incomplete = Some(reason);
                    break;
                }
                other => return Err(other),
            }
        }
    }
    Ok(search.finish())
}

struct Search<'a> {
    env: &'a dyn Environment,
    proposers: Vec<&'a mut Box<dyn Proposer>>,
    config: &'a SearchConfig,
    phis: Vec<f64>,
    tree: SearchTree,
    stats: Vec<ModelStats>,
    rng: ChaCha8Rng,
    samples: Vec<SampleRecord>,
    best_state: ProgramState,
    best_speedup: f64,
    incomplete: Option<String>,
}

struct Evaluated {
    node: NodeId,
    terminal: ProgramState,
    reward: f64,
}

impl<'a> Search<'a> {
    fn new(env: &'a dyn Environment, pool: &'a mut ProposerPool, config: &'a SearchConfig) -> Result<Self> {
        config.policy.validate()?;
        let models = &config.model_set;
        if config.root_model.0 >= models.len() {
            return Err(Error::UnknownModel(format!("#{}", config.root_model.0)));
        }
        if let Some(missing) = models.models().iter().find(|m| !pool.contains_key(&m.id)) {
            return Err(Error::Config(format!("no proposer for model {:?}", missing.id)));
        }
        let mut by_id: BTreeMap<&String, &'a mut Box<dyn Proposer>> = pool.iter_mut().collect();
        let proposers = models
            .models()
            .iter()
            .map(|m| by_id.remove(&m.id).expect("checked above"))
            .collect();
        let phis = models
            .models()
            .iter()
            .map(|m| phi_small(m, models, config.policy.epsilon))
            .collect::<Result<Vec<_>>>()?;

        let root = ProgramState::initial(config.horizon);
        let tree = SearchTree::new(root.clone(), env.cost(&root), config.root_model, config.policy.branching);
        Ok(Search {
            env,
            proposers,
            config,
            phis,
            tree,
            stats: vec![ModelStats::default(); models.len()],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            samples: Vec::new(),
            best_speedup: env.speedup(&root),
            best_state: root,
            incomplete: None,
        })
    }

    fn models(&self) -> &'a ModelSet {
        &self.config.model_set
    }

    fn trial(&mut self, trial: usize) -> Result<()> {
        let path = self.tree.select_leaf(&self.config.policy, &self.phis, &mut self.rng);
        let leaf = *path.last().expect("nonempty path");
        if self.tree.node(leaf).state.at_horizon() {
            self.revisit_terminal(trial, &path);
            return Ok(());
        }

        let ctx = self.context(leaf, trial);
        let actor = self.tree.node(leaf).acting_model;
        let proposal = self.propose(actor, &ctx, leaf)?;
        let child = self
            .tree
            .expand(leaf, &proposal.mutators, proposal.next_model, self.env)?;
        let evaluated = self.evaluate(child);
        let improved = self.env.speedup(&self.tree.node(child).state) > self.env.speedup(&self.tree.node(leaf).state);
        self.stats[actor.0].record_outcome(improved, proposal.errors());

        let alter = self.config.course_alteration_enabled
            && self.tree.check_course_alteration(&path, child, self.models())
            && !self.models().is_largest(actor);
        self.log(trial, &path, SampleKind::Expansion, actor, &proposal, &evaluated, improved, alter);
        if alter {
            self.course_alter(trial, &path, child, &ctx)
        } else {
            self.backpropagate(&path, &evaluated);
            Ok(())
        }
    }

    /// Prunes `regressive` and re-expands its parent under the largest model
    /// with the same context. Only the replacement's reward is backpropagated.
    fn course_alter(&mut self, trial: usize, path: &[NodeId], regressive: NodeId, ctx: &ProposerContext) -> Result<()> {
        let leaf = *path.last().expect("nonempty path");
        self.tree.prune(regressive);
        let largest = self.models().largest();
        let proposal = self.propose(largest, ctx, leaf)?;
        let replacement = self
            .tree
            .attach(leaf, &proposal.mutators, proposal.next_model, largest, self.env)?;
        let evaluated = self.evaluate(replacement);
        let improved = self.env.speedup(&self.tree.node(replacement).state) > self.env.speedup(&self.tree.node(leaf).state);
        self.stats[largest.0].record_alteration(proposal.errors());
        self.log(trial, path, SampleKind::Alteration, largest, &proposal, &evaluated, improved, false);
        self.backpropagate(path, &evaluated);
        Ok(())
    }

    fn revisit_terminal(&mut self, trial: usize, path: &[NodeId]) {
        let leaf = *path.last().expect("nonempty path");
        let node = self.tree.node(leaf);
        let state = node.state.clone();
        let actor = node.acting_model;
        let evaluated = Evaluated {
            node: leaf,
            reward: self.env.reward(&state),
            terminal: state,
        };
        let cost = self.env.cost(&evaluated.terminal);
        let speedup = self.env.speedup(&evaluated.terminal);
        self.samples.push(SampleRecord {
            sample: self.samples.len(),
            trial,
            kind: SampleKind::Terminal,
            depth: path.len() - 1,
            node: leaf.0,
            acting_model: self.models().id(actor).to_string(),
            mutators: Vec::new(),
            next_model: None,
            child_cost: cost,
            child_speedup: speedup,
            rollout_speedup: speedup,
            rollout_reward: evaluated.reward,
            improved: false,
            errors: 0,
            regression: false,
            alteration: false,
            pruned: false,
            best_speedup: self.best_speedup,
        });
        self.tree.backpropagate(path, evaluated.reward);
    }

    fn propose(&mut self, model: ModelIdx, ctx: &ProposerContext, leaf: NodeId) -> Result<JointProposal> {
        let req = ProposalRequest {
            ctx,
            models: self.models(),
            env: self.env,
        };
        // A reply whose envelope cannot be read is scored like any other
        // unparseable answer rather than aborting the run.
        let raw = match self.proposers[model.0].respond(&req, &mut self.rng) {
            Err(Error::UnparseableResponse(_)) => String::new(),
            other => other?,
        };
        let state = &self.tree.node(leaf).state;
        Ok(parse_proposal(&raw, state, self.models(), model, &mut self.rng))
    }

    /// Rolls out from `node` and folds the child and terminal into the best-so-far.
    fn evaluate(&mut self, node: NodeId) -> Evaluated {
        let state = self.tree.node(node).state.clone();
        let (terminal, reward) = rollout(&state, self.config.rollout_depth, self.env, &mut self.rng);
        for candidate in [&state, &terminal] {
            let s = self.env.speedup(candidate);
            if s > self.best_speedup {
                self.best_speedup = s;
                self.best_state = candidate.clone();
            }
        }
        Evaluated { node, terminal, reward }
    }

    fn backpropagate(&mut self, path: &[NodeId], evaluated: &Evaluated) {
        let mut full = path.to_vec();
        full.push(evaluated.node);
        self.tree.backpropagate(&full, evaluated.reward);
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &mut self,
        trial: usize,
        path: &[NodeId],
        kind: SampleKind,
        actor: ModelIdx,
        proposal: &JointProposal,
        evaluated: &Evaluated,
        improved: bool,
        pruned: bool,
    ) {
        let child = self.tree.node(evaluated.node);
        let models = self.models();
        self.samples.push(SampleRecord {
            sample: self.samples.len(),
            trial,
            kind,
            depth: path.len() - 1,
            node: evaluated.node.0,
            acting_model: models.id(actor).to_string(),
            mutators: proposal.mutators.iter().map(|m| m.canonical()).collect(),
            next_model: Some(models.id(proposal.next_model).to_string()),
            child_cost: child.stats.raw_cost,
            child_speedup: self.env.speedup(&child.state),
            rollout_speedup: self.env.speedup(&evaluated.terminal),
            rollout_reward: evaluated.reward,
            improved,
            errors: proposal.errors(),
            regression: child.is_regression,
            alteration: kind == SampleKind::Alteration,
            pruned,
            best_speedup: self.best_speedup,
        });
    }

    fn summary(&self, id: NodeId, with_program: bool) -> NodeSummary {
        let state = &self.tree.node(id).state;
        NodeSummary {
            trace: state.trace().to_vec(),
            predicted_score: self.env.speedup(state),
            program: with_program.then(|| self.env.render(state)),
        }
    }

    fn context(&self, leaf: NodeId, trial: usize) -> ProposerContext {
        let models = self.models();
        let node = self.tree.node(leaf);
        let parent = node.parent;
        let grandparent = parent.and_then(|p| self.tree.node(p).parent);
        let local = |id: Option<NodeId>| match id {
            None => LocalModel {
                expanded_by: None,
                parameter_count: None,
                score_delta: None,
            },
            Some(id) => {
                let n = self.tree.node(id);
                LocalModel {
                    expanded_by: n.expanded_by.map(|m| models.id(m).to_string()),
                    parameter_count: n.expanded_by.map(|m| models.get(m).parameter_count),
                    score_delta: n.parent.map(|p| {
                        self.env.speedup(&n.state) - self.env.speedup(&self.tree.node(p).state)
                    }),
                }
            }
        };
        ProposerContext {
            state: node.state.clone(),
            current: self.summary(leaf, true),
            parent: parent.map(|p| self.summary(p, true)),
            grandparent: grandparent.map(|g| self.summary(g, false)),
            available_mutators: node.state.valid_mutators().iter().map(|m| m.canonical()).collect(),
            leaf_depth: node.depth,
            trials_done: trial,
            trials_total: self.config.trials,
            global_stats: self.snapshots(),
            local_models: [local(Some(leaf)), local(parent), local(grandparent)],
        }
    }

    fn snapshots(&self) -> Vec<ModelSnapshot> {
        self.models()
            .models()
            .iter()
            .zip(&self.stats)
            .map(|(m, s)| ModelSnapshot {
                id: m.id.clone(),
                parameter_count: m.parameter_count,
                stats: *s,
            })
            .collect()
    }

    fn finish(self) -> SearchResult {
        let tree_summary = TreeSummary {
            nodes: self.tree.len(),
            pruned: self.tree.pruned_count(),
            max_depth: self.tree.nodes().iter().map(|n| n.depth).max().unwrap_or(0),
        };
        SearchResult {
            final_stats: self.snapshots(),
            best_state: self.best_state,
            best_speedup: self.best_speedup,
            samples: self.samples,
            tree_summary,
            tree: self.tree,
            incomplete: self.incomplete,
        }
    }
}

//! Proposal generation.
//!
//! A proposer answers "which transformations next, and which model after
//! that?" for the node being expanded. The engine hands every proposer the
//! same [`ProposerContext`]; backends return raw text in the JSON answer
//! format, which [`parse_proposal`] validates into a [`JointProposal`].

mod parse;
mod prompt;
mod remote;
mod scripted;

use rand::RngCore;
use serde::Serialize;

use crate::env::Environment;
use crate::error::Result;
use crate::program::{ModelSet, Mutator, ProgramState};

pub use parse::{parse_proposal, JointProposal, ValidationNote};
pub use prompt::{build_prompt, format_hit_rate, format_params, LARGEST_MODEL_MIN_SHARE};
pub use remote::{remote_propose, RemoteConfig, RemoteProposer, RetryPolicy, TOKEN_ENV_VAR};
pub use scripted::{greedy_mutator, scripted_propose, ScriptedProfile, ScriptedProposer};

/// Answers proposal requests for one model.
pub trait Proposer {
    /// Returns the raw response text for `req`.
    ///
    /// Randomized implementations must draw only from `rng` so runs stay
    /// reproducible under a fixed seed.
    fn respond(&mut self, req: &ProposalRequest<'_>, rng: &mut dyn RngCore) -> Result<String>;
}

pub struct ProposalRequest<'a> {
    pub ctx: &'a ProposerContext,
    pub models: &'a ModelSet,
    pub env: &'a dyn Environment,
}

/// Per-model invocation record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModelStats {
    /// Regular invocations; course-alteration queries are counted separately.
    pub calls: u64,
    pub hits: u64,
    pub errors: u64,
    pub course_alterations: u64,
}

impl ModelStats {
    pub fn record_outcome(&mut self, improved: bool, errors_incurred: u32) {
        self.calls += 1;
        self.hits += u64::from(improved);
        self.errors += u64::from(errors_incurred);
    }

    pub fn record_alteration(&mut self, errors_incurred: u32) {
        self.course_alterations += 1;
        self.errors += u64::from(errors_incurred);
    }

    pub fn hit_rate(&self) -> Option<f64> {
        (self.calls > 0).then(|| self.hits as f64 / self.calls as f64)
    }
}

/// Summary of one node on the expansion path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub trace: Vec<Mutator>,
    pub predicted_score: f64,
    pub program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSnapshot {
    pub id: String,
    pub parameter_count: f64,
    pub stats: ModelStats,
}

/// Which model expanded a node near the leaf, and how much the predicted
/// score moved along that edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalModel {
    pub expanded_by: Option<String>,
    pub parameter_count: Option<f64>,
    pub score_delta: Option<f64>,
}

/// Everything a proposer sees when asked to expand a node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProposerContext {
    /// The program being expanded; rendered through `current`.
    pub state: ProgramState,
    pub current: NodeSummary,
    pub parent: Option<NodeSummary>,
    pub grandparent: Option<NodeSummary>,
    pub available_mutators: Vec<String>,
    pub leaf_depth: usize,
    pub trials_done: usize,
    pub trials_total: usize,
    pub global_stats: Vec<ModelSnapshot>,
    /// Current node, parent, grandparent, in that order.
    pub local_models: [LocalModel; 3],
}

impl ProposerContext {
    /// Context for a detached program with no ancestors, fresh statistics
    /// and no trial progress.
    pub fn for_state(state: &ProgramState, env: &dyn Environment, models: &ModelSet) -> Self {
        let none = || LocalModel {
            expanded_by: None,
            parameter_count: None,
            score_delta: None,
        };
        ProposerContext {
            state: state.clone(),
            current: NodeSummary {
                trace: state.trace().to_vec(),
                predicted_score: env.speedup(state),
                program: Some(env.render(state)),
            },
            parent: None,
            grandparent: None,
            available_mutators: state.valid_mutators().iter().map(Mutator::canonical).collect(),
            leaf_depth: 0,
            trials_done: 0,
            trials_total: 0,
            global_stats: models
                .models()
                .iter()
                .map(|m| ModelSnapshot {
                    id: m.id.clone(),
                    parameter_count: m.parameter_count,
                    stats: ModelStats::default(),
                })
                .collect(),
            local_models: [none(), none(), none()],
        }
    }
}

//! Model-aware tree policy.
//!
//! Child selection scores each child with a UCT variant that adds a
//! size prior over the child's acting model:
//!
//! ```text
//! score = (1 - lambda) * Q / N + lambda * phi_small(m) + c * sqrt(ln N_parent / N)
//! ```
//!
//! `phi_small` is a log-scale preference for small models: 0 for the
//! largest model in the set and just under 1 for the smallest. The prior
//! shapes where search effort goes; it never enters the reward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::program::{ModelDescriptor, ModelSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub lambda: f64,
    pub c: f64,
    pub epsilon: f64,
    pub branching: usize,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            lambda: 0.5,
            c: std::f64::consts::SQRT_2,
            epsilon: 1e-9,
            branching: 2,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.branching == 0 {
            return Err(Error::Config("branching must be at least 1".into()));
        }
        Ok(())
    }
}

/// Visit count and summed reward of a node, plus the cost of its program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeStats {
    pub visits: u64,
    pub cumulative_reward: f64,
    pub raw_cost: f64,
}

impl NodeStats {
    pub fn new(raw_cost: f64) -> Self {
        NodeStats {
            visits: 0,
            cumulative_reward: 0.0,
            raw_cost,
        }
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.cumulative_reward / self.visits as f64)
    }
}

/// Normalized small-model preference of `model` within `model_set`.
pub fn phi_small(model: &ModelDescriptor, model_set: &ModelSet, epsilon: f64) -> Result<f64> {
    if !model_set.models().iter().any(|m| m == model) {
        return Err(Error::UnknownModel(model.id.clone()));
    }
    if model_set.len() == 1 {
        return Ok(0.0);
    }
    let log_max = model_set.max_params().ln();
    let log_min = model_set.min_params().ln();
    Ok((log_max - model.parameter_count.ln()) / (log_max - log_min + epsilon))
}

/// MA-UCT score; unvisited children score `+inf` so they are tried first.
pub fn ma_uct_score(child: &NodeStats, phi: f64, parent_visits: u64, params: &PolicyParams) -> f64 {
    if child.visits == 0 {
        return f64::INFINITY;
    }
    let n = child.visits as f64;
    let exploit = child.cumulative_reward / n;
    let explore = ((parent_visits.max(1) as f64).ln() / n).sqrt();
    (1.0 - params.lambda) * exploit + params.lambda * phi + params.c * explore
}

/// Index of the highest-scoring child; exact ties are broken uniformly at random.
pub fn select_child<R: Rng + ?Sized>(
    children: &[(NodeStats, f64)],
    parent_visits: u64,
    params: &PolicyParams,
    rng: &mut R,
) -> Result<usize> {
    if children.is_empty() {
        return Err(Error::EmptyChildren);
    }
    let scores: Vec<f64> = children
        .iter()
        .map(|(stats, phi)| ma_uct_score(stats, *phi, parent_visits, params))
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    Ok(match tied.as_slice() {
        [only] => *only,
        many => many[rng.gen_range(0..many.len())],
    })
}

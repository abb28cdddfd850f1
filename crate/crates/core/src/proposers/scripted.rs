use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{ProposalRequest, Proposer, ProposerContext};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::program::{ModelSet, Mutator, ProgramState};

/// Name emitted when a scripted model "makes a mistake".
const INVALID_NAME: &str = "TileSize";

/// Behavior knobs of a scripted stand-in for a language model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedProfile {
    /// Probability of proposing the best one-step transformation.
    pub greedy_prob: f64,
    /// Probability of answering with an invalid transformation name.
    pub error_rate: f64,
    /// Probability of recommending the smallest model next.
    pub self_bias: f64,
}

impl ScriptedProfile {
    pub fn perfect_greedy() -> Self {
        ScriptedProfile {
            greedy_prob: 1.0,
            error_rate: 0.0,
            self_bias: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("greedy_prob", self.greedy_prob),
            ("error_rate", self.error_rate),
            ("self_bias", self.self_bias),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// The valid mutator with the largest one-step speedup; ties go to the
/// canonically smallest name.
pub fn greedy_mutator(state: &ProgramState, env: &dyn Environment) -> Option<Mutator> {
    let mut best: Option<(Mutator, f64)> = None;
    for m in state.valid_mutators() {
        let next = state.apply(m).expect("valid mutators apply");
        let gain = env.speedup(&next);
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((m, gain));
        }
    }
    best.map(|(m, _)| m)
}

#[derive(Serialize)]
struct Answer<'a> {
    transformations: Vec<String>,
    next_model: &'a str,
}

/// Produces a raw answer in the JSON proposal format.
pub fn scripted_propose(
    profile: &ScriptedProfile,
    ctx: &ProposerContext,
    env: &dyn Environment,
    models: &ModelSet,
    rng: &mut dyn RngCore,
) -> String {
    let transformation = if rng.gen_bool(profile.error_rate) {
        INVALID_NAME.to_string()
    } else if rng.gen_bool(profile.greedy_prob) {
        greedy_mutator(&ctx.state, env).map_or_else(String::new, |m| m.canonical())
    } else {
        ctx.available_mutators.choose(rng).cloned().unwrap_or_default()
    };
    let next = if rng.gen_bool(profile.self_bias) {
        models.smallest()
    } else {
        models
            .indices()
            .collect::<Vec<_>>()
            .choose(rng)
            .copied()
            .expect("model set is nonempty")
    };
    let answer = Answer {
        transformations: vec![transformation],
        next_model: models.id(next),
    };
    serde_json::to_string_pretty(&answer).expect("answer serializes")
}

#[derive(Debug, Clone)]
pub struct ScriptedProposer {
    profile: ScriptedProfile,
}

impl ScriptedProposer {
    pub fn new(profile: ScriptedProfile) -> Result<Self> {
        profile.validate()?;
        Ok(ScriptedProposer { profile })
    }
}

impl Proposer for ScriptedProposer {
    fn respond(&mut self, req: &ProposalRequest<'_>, rng: &mut dyn RngCore) -> Result<String> {
        Ok(scripted_propose(&self.profile, req.ctx, req.env, req.models, rng))
    }
}

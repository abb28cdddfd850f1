//! Run configuration files (TOML).
//!
//! ```toml
//! [environment]
//! base_cost = 1000.0
//! horizon = 8
//!
//! [search]
//! trials = 300
//! seed = 42
//!
//! [policy]
//! lambda = 0.5
//!
//! [[models]]
//! id = "gpt-5-mini"
//! parameter_count = 20e9
//! backend = { kind = "scripted", greedy_prob = 0.4, error_rate = 0.1, self_bias = 0.5 }
//!
//! [output]
//! dir = "runs/example"
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::env::{SynthKernel, DEFAULT_BASE_COST};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::program::{ModelDescriptor, ModelSet, DEFAULT_HORIZON};
use crate::proposers::{Proposer, RemoteConfig, RemoteProposer, ScriptedProfile, ScriptedProposer, TOKEN_ENV_VAR};
use crate::search::{ProposerPool, SearchConfig, DEFAULT_ROLLOUT_DEPTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub environment: EnvironmentConfig,
    pub search: SearchSection,
    #[serde(default)]
    pub policy: PolicySection,
    pub models: Vec<ModelConfig>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    pub base_cost: f64,
    pub horizon: usize,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            base_cost: DEFAULT_BASE_COST,
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub trials: usize,
    #[serde(default = "default_rollout_depth")]
    pub rollout_depth: usize,
    pub seed: u64,
    /// Defaults to the largest model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_model: Option<String>,
    #[serde(default = "default_true")]
    pub course_alteration_enabled: bool,
}

fn default_rollout_depth() -> usize {
    DEFAULT_ROLLOUT_DEPTH
}

fn default_true() -> bool {
    true
}

/// Policy hyperparameters; omitted keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub lambda: f64,
    pub c: f64,
    pub epsilon: f64,
    pub branching: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        let p = PolicyParams::default();
        PolicySection {
            lambda: p.lambda,
            c: p.c,
            epsilon: p.epsilon,
            branching: p.branching,
        }
    }
}

impl From<&PolicySection> for PolicyParams {
    fn from(s: &PolicySection) -> Self {
        PolicyParams {
            lambda: s.lambda,
            c: s.c,
            epsilon: s.epsilon,
            branching: s.branching,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub parameter_count: f64,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Scripted {
        greedy_prob: f64,
        error_rate: f64,
        self_bias: f64,
    },
    Remote {
        endpoint: String,
        model_name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        response_path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment()?;
        let models = self.model_set()?;
        if let Some(root) = &self.search.root_model {
            models
                .lookup(root)
                .map_err(|_| Error::Config(format!("root_model {root:?} is not a configured model")))?;
        }
        PolicyParams::from(&self.policy).validate()?;
        for m in &self.models {
            if let Backend::Scripted { .. } = m.backend {
                self.scripted_profile(m).expect("scripted").validate()?;
            }
        }
        Ok(())
    }

    pub fn environment(&self) -> Result<SynthKernel> {
        SynthKernel::new(self.environment.base_cost, self.environment.horizon)
    }

    pub fn model_set(&self) -> Result<ModelSet> {
        ModelSet::new(
            self.models
                .iter()
                .map(|m| ModelDescriptor::new(m.id.clone(), m.parameter_count))
                .collect(),
        )
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        let model_set = self.model_set()?;
        let root_model = match &self.search.root_model {
            Some(id) => model_set.lookup(id)?,
            None => model_set.largest(),
        };
        Ok(SearchConfig {
            trials: self.search.trials,
            horizon: self.environment.horizon,
            rollout_depth: self.search.rollout_depth,
            policy: PolicyParams::from(&self.policy),
            model_set,
            root_model,
            seed: self.search.seed,
            course_alteration_enabled: self.search.course_alteration_enabled,
        })
    }

    fn scripted_profile(&self, m: &ModelConfig) -> Option<ScriptedProfile> {
        match m.backend {
            Backend::Scripted {
                greedy_prob,
                error_rate,
                self_bias,
            } => Some(ScriptedProfile {
                greedy_prob,
                error_rate,
                self_bias,
            }),
            Backend::Remote { .. } => None,
        }
    }

    /// Instantiates one proposer per model. Remote backends read their token
    /// from [`TOKEN_ENV_VAR`] here, so a missing token fails before search.
    pub fn build_proposers(&self) -> Result<ProposerPool> {
        let mut pool = ProposerPool::new();
        for m in &self.models {
            let proposer: Box<dyn Proposer> = match &m.backend {
                Backend::Scripted { .. } => {
                    Box::new(ScriptedProposer::new(self.scripted_profile(m).expect("scripted"))?)
                }
                Backend::Remote {
                    endpoint,
                    model_name,
                    response_path,
                    timeout_secs,
                } => {
                    let mut remote = RemoteConfig::from_env(endpoint.clone(), model_name.clone(), TOKEN_ENV_VAR)?;
                    if let Some(path) = response_path {
                        remote.response_path = path.clone();
                    }
                    if let Some(secs) = timeout_secs {
                        remote.timeout = Duration::from_secs(*secs);
                    }
                    Box::new(RemoteProposer::new(remote))
                }
            };
            pool.insert(m.id.clone(), proposer);
        }
        Ok(pool)
    }
}

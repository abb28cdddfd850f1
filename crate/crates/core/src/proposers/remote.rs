//! Blocking chat-completion client.

use std::thread;
use std::time::Duration;

use rand::RngCore;
use serde_json::{json, Value};

use super::{build_prompt, ProposalRequest, Proposer};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token for remote backends.
pub const TOKEN_ENV_VAR: &str = "COLT_API_TOKEN";
pub const DEFAULT_RESPONSE_PATH: &str = "choices.0.message.content";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after every failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay_after(&self, failed_attempts: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(failed_attempts.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model_name: String,
    pub token: String,
    /// Dotted path to the assistant text in the response body; numeric
    /// segments index arrays.
    pub response_path: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model_name: impl Into<String>, token: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            token: token.into(),
            response_path: DEFAULT_RESPONSE_PATH.to_string(),
            timeout: DEFAULT_TIMEOUT,
            retry: RetryPolicy::default(),
        }
    }

    /// Reads the token from `var`; fails before any request is made if unset.
    pub fn from_env(endpoint: impl Into<String>, model_name: impl Into<String>, var: &str) -> Result<Self> {
        let token = std::env::var(var)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::Config(format!("environment variable {var} is not set")))?;
        Ok(RemoteConfig::new(endpoint, model_name, token))
    }
}

enum Attempt {
    Retryable(String),
    Fatal(Error),
}

/// Sends `prompt` as a single system message and returns the assistant text.
pub fn remote_propose(config: &RemoteConfig, prompt: &str) -> Result<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let body = json!({
        "model": config.model_name,
        "messages": [{"role": "system", "content": prompt}],
    })
    .to_string();

    let mut last_failure = String::new();
    for attempt in 1..=config.retry.max_attempts.max(1) {
        match send_once(&agent, config, &body) {
            Ok(text) => return extract_text(&text, &config.response_path),
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retryable(reason)) => last_failure = reason,
        }
        if attempt < config.retry.max_attempts {
            thread::sleep(config.retry.delay_after(attempt));
        }
    }
    Err(Error::ProposerUnavailable(format!(
        "{} after {} attempt(s): {last_failure}",
        config.endpoint, config.retry.max_attempts
    )))
}

fn send_once(agent: &ureq::Agent, config: &RemoteConfig, body: &str) -> Result<String, Attempt> {
    let mut response = agent
        .post(&config.endpoint)
        .header("Authorization", &format!("Bearer {}", config.token))
        .content_type("application/json")
        .send(body)
        .map_err(|e| Attempt::Retryable(e.to_string()))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| Attempt::Retryable(e.to_string()))?;
    match status {
        200..=299 => Ok(text),
        429 | 500..=599 => Err(Attempt::Retryable(format!("HTTP {status}"))),
        _ => Err(Attempt::Fatal(Error::ProposerUnavailable(format!(
            "{} answered HTTP {status}",
            config.endpoint
        )))),
    }
}

fn extract_text(body: &str, path: &str) -> Result<String> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| Error::UnparseableResponse(format!("response is not JSON: {e}")))?;
    let mut cursor = &value;
    for segment in path.split('.').filter(|s| !s.is_empty()) {
        let next = match segment.parse::<usize>() {
            Ok(i) => cursor.get(i),
            Err(_) => cursor.get(segment),
        };
        cursor = next.ok_or_else(|| {
            Error::UnparseableResponse(format!("response has no {path:?}"))
        })?;
    }
    cursor
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::UnparseableResponse(format!("{path:?} is not a string")))
}

/// Proposer backed by an HTTP chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct RemoteProposer {
    config: RemoteConfig,
}

impl RemoteProposer {
    pub fn new(config: RemoteConfig) -> Self {
        RemoteProposer { config }
    }
}

impl Proposer for RemoteProposer {
    fn respond(&mut self, req: &ProposalRequest<'_>, _rng: &mut dyn RngCore) -> Result<String> {
        let prompt = build_prompt(req.ctx, req.models);
        remote_propose(&self.config, &prompt)
    }
}

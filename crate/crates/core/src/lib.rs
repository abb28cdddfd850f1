//! Collaborative compiler-optimization search with multiple proposer models.
//!
//! A single Monte Carlo tree search runs over joint (program, model) states.
//! Models of different sizes propose transformation sequences together with
//! a recommendation for which model should act next; a model-aware UCT
//! policy biases exploration toward cheaper models, and course alteration
//! escalates to the largest model when small models keep regressing.
//!
//! The crate ships a deterministic synthetic environment ([`env::SynthKernel`])
//! with an exhaustive oracle, scripted proposers for reproducible experiments,
//! and a blocking HTTP client for chat-completion backends.

pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod program;
pub mod proposers;
pub mod report;
pub mod search;

pub use error::{Error, Result};

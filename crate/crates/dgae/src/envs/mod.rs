//! Deterministic, seedable desk-scale environments with known or
//! brute-force-computable return distributions.
//!
//! Two environments are provided: a small stochastic [`chain::ChainMdp`]
//! whose return distributions can be enumerated exactly by the
//! [`oracle`] module, and a continuous-control double integrator
//! ([`pointmass::PointMass`]) used for the learning experiments.
//!
//! Episode ends distinguish true termination from time-limit truncation:
//! `done` means the return-to-go is exactly zero (zero-distribution
//! bootstrap), `truncated` means the episode was cut short and the value
//! estimate at the final state stands in for the tail.

use thiserror::Error;

pub mod chain;
pub mod oracle;
pub mod pointmass;

pub use chain::{ChainConfig, ChainMdp, RewardLaw};
pub use oracle::{exact_return_distribution, tabular_values, ChainPolicy, OracleConfig};
pub use pointmass::PointMass;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("reward law has no finite atom decomposition; exact enumeration unavailable")]
    NonEnumerable,
    #[error("outcome atom count exceeded cap {cap} during enumeration")]
    OutcomeCapExceeded { cap: usize },
}

/// Static description of an environment's interface and reward bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub max_episode_steps: usize,
}

/// Outcome of one environment step.
///
/// `done` and `truncated` are never both set: `done` wins when a terminal
/// state is reached exactly at the time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    /// Start a new episode and return its initial state.
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> StepResult;
    /// Start a fresh episode at the given state (used by test oracles).
    fn set_state(&mut self, state: &[f64]);
    /// Re-seed the environment's noise stream.
    fn reseed(&mut self, seed: u64);
}

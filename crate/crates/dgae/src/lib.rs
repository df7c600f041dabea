//! Distributional generalized advantage estimation (DGAE).
//!
//! Return distributions are represented by their inverse CDF sampled at `N`
//! midpoint quantile fractions. A signed, directional transport metric on
//! that representation yields distributional TD errors, which an
//! exponentially weighted backward recursion turns into advantage estimates
//! for on-policy policy-gradient agents. The library ships:
//!
//! - [`quantdist`]: the quantile representation and the metrics on it,
//! - [`advantage`]: rollout buffers, distributional TD errors, the DGAE
//!   estimator and its scalar GAE baseline,
//! - [`distvalue`]: distributional Bellman targets and the quantile-Huber
//!   regression loss with analytic gradients,
//! - [`nn`]: a minimal fixed-topology MLP with exact reverse-mode gradients,
//!   a Gaussian policy head, and Adam,
//! - [`envs`]: deterministic desk-scale environments with brute-force return
//!   distribution oracles,
//! - [`agents`]: synchronous A2C- and PPO-style agents in distributional and
//!   scalar variants,
//! - [`harness`]: experiment configuration, multi-seed orchestration, CSV
//!   reporting, and the `verify` check suite.
//!
//! Everything is deterministic under a fixed seed; see [`rng`] for how
//! per-role random streams are derived.

pub mod advantage;
pub mod agents;
pub mod distvalue;
pub mod envs;
pub mod harness;
pub mod nn;
pub mod quantdist;
pub mod rng;

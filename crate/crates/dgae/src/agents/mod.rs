//! On-policy policy-gradient agents in distributional (DA2C, DPPO) and
//! scalar (A2C, PPO) variants.
//!
//! All four share one code path: a Gaussian policy, a quantile value network
//! (a single quantile for the scalar variants), rollout collection, and an
//! update step. The only differences are the advantage source (DGAE vs
//! scalar GAE), the value loss (quantile-Huber vs squared error on the same
//! one-step Bellman targets), and the update style (one full-batch step vs
//! clipped-surrogate epochs over minibatches).
//!
//! The on-policy contract is enforced by ownership: `update` consumes its
//! buffer, so no data can survive into the next policy iteration.

mod rollout;
mod train;
mod update;

pub use rollout::evaluate_policy;
pub use train::{train, EvalPoint, TrainRecord};

use thiserror::Error;

use crate::advantage::{dgae, scalar_gae, AdvantageError, GaeParams, RolloutBuffer};
use crate::distvalue::QuantileHuberParams;
use crate::nn::{Adam, GaussianPolicy, QuantileValueNet};
use crate::quantdist::{QuantError, QuantileFractions};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Advantage(#[from] AdvantageError),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite {quantity} during update: {value}")]
    NonFinite { quantity: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Da2c,
    Dppo,
    A2c,
    Ppo,
}

impl Algorithm {
    pub fn is_distributional(self) -> bool {
        matches!(self, Algorithm::Da2c | Algorithm::Dppo)
    }

    pub fn is_ppo_style(self) -> bool {
        matches!(self, Algorithm::Dppo | Algorithm::Ppo)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "da2c" => Some(Algorithm::Da2c),
            "dppo" => Some(Algorithm::Dppo),
            "a2c" => Some(Algorithm::A2c),
            "ppo" => Some(Algorithm::Ppo),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Da2c => "da2c",
            Algorithm::Dppo => "dppo",
            Algorithm::A2c => "a2c",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gae: GaeParams,
    pub rollout_length: usize,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_lr: f64,
    pub policy_lr: f64,
    pub normalize_advantages: bool,
    /// Huber threshold of the distributional value loss.
    pub kappa: f64,
    /// Emit per-state log-std from the policy network instead of the
    /// state-independent parameter vector.
    pub state_dependent_std: bool,
}

impl AgentConfig {
    /// Conventional defaults; advantage normalization is on for the
    /// PPO-style agents and off for the A2C-style ones.
    pub fn defaults(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            gae: GaeParams { gamma: 0.99, lambda: 0.95 },
            rollout_length: 2048,
            ppo_clip: 0.2,
            ppo_epochs: 10,
            minibatch_size: 64,
            entropy_coef: 0.0,
            value_lr: 3e-4,
            policy_lr: 3e-4,
            normalize_advantages: algorithm.is_ppo_style(),
            kappa: 1.0,
            state_dependent_std: false,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        GaeParams::new(self.gae.gamma, self.gae.lambda)
            .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
        if self.rollout_length < 2 {
            return Err(AgentError::InvalidConfig(format!(
                "rollout_length must be at least 2, got {}",
                self.rollout_length
            )));
        }
        if !(self.ppo_clip > 0.0 && self.ppo_clip < 1.0) {
            return Err(AgentError::InvalidConfig(format!(
                "ppo_clip must lie in (0, 1), got {}",
                self.ppo_clip
            )));
        }
        if self.ppo_epochs == 0 || self.minibatch_size == 0 {
            return Err(AgentError::InvalidConfig(
                "ppo_epochs and minibatch_size must be positive".into(),
            ));
        }
        if self.entropy_coef < 0.0 || self.entropy_coef.is_nan() {
            return Err(AgentError::InvalidConfig(format!(
                "entropy_coef must be nonnegative, got {}",
                self.entropy_coef
            )));
        }
        if !(self.value_lr > 0.0 && self.policy_lr > 0.0) {
            return Err(AgentError::InvalidConfig("learning rates must be positive".into()));
        }
        if self.kappa <= 0.0 || self.kappa.is_nan() {
            return Err(AgentError::InvalidConfig(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Per-update diagnostics, one CSV row each in the harness stream.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiagnostics {
    pub iter: usize,
    pub timesteps: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_advantage: f64,
    pub policy_grad_norm: f64,
    pub value_grad_norm: f64,
    pub clip_fraction: Option<f64>,
    pub mean_return_eval: Option<f64>,
}

/// Policy, value network and optimizer state for one algorithm.
pub struct Agent {
    config: AgentConfig,
    pub policy: GaussianPolicy,
    pub value_net: QuantileValueNet,
    fractions: QuantileFractions,
    huber: QuantileHuberParams,
    adam_policy: Adam,
    adam_value: Adam,
}

impl Agent {
    /// Build an agent with freshly initialized networks. Scalar algorithms
    /// always use a single-quantile value head regardless of `n_quantiles`.
    pub fn new(
        config: AgentConfig,
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        n_quantiles: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        if state_dim == 0 || action_dim == 0 || hidden == 0 || n_quantiles == 0 {
            return Err(AgentError::InvalidConfig(
                "state_dim, action_dim, hidden and n_quantiles must be positive".into(),
            ));
        }
        let n = if config.algorithm.is_distributional() { n_quantiles } else { 1 };
        let policy =
            GaussianPolicy::init(state_dim, action_dim, hidden, config.state_dependent_std, rng);
        let value_net = QuantileValueNet::init(state_dim, n, hidden, rng);
        let huber = QuantileHuberParams::new(config.kappa)
            .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            fractions: QuantileFractions::midpoints(n),
            adam_policy: Adam::new(policy.param_count()),
            adam_value: Adam::new(value_net.mlp().params().len()),
            config,
            policy,
            value_net,
            huber,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn n_quantiles(&self) -> usize {
        self.value_net.n_quantiles()
    }

    /// The advantage source this algorithm is wired to: DGAE for the
    /// distributional agents, scalar GAE for the baselines.
    pub fn compute_advantages(&self, buffer: &RolloutBuffer) -> Result<Vec<f64>, AgentError> {
        let adv = if self.config.algorithm.is_distributional() {
            dgae(buffer, &self.config.gae)?
        } else {
            scalar_gae(buffer, &self.config.gae)?
        };
        Ok(adv)
    }

    /// One policy-iteration update. Consumes the buffer: on-policy data
    /// never outlives the iteration that collected it.
    pub fn update(
        &mut self,
        buffer: RolloutBuffer,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<UpdateDiagnostics, AgentError> {
        for tr in &buffer.transitions {
            check_finite_value("reward", tr.reward)?;
        }
        if self.config.algorithm.is_ppo_style() {
            update::ppo_update(self, buffer, rng)
        } else {
            update::a2c_update(self, buffer)
        }
    }
}

pub(crate) fn check_finite_value(quantity: &'static str, value: f64) -> Result<f64, AgentError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(AgentError::NonFinite { quantity, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_parsing_and_classification() {
        assert_eq!(Algorithm::parse("DPPO"), Some(Algorithm::Dppo));
        assert_eq!(Algorithm::parse("a2c"), Some(Algorithm::A2c));
        assert_eq!(Algorithm::parse("sac"), None);
        assert!(Algorithm::Da2c.is_distributional());
        assert!(!Algorithm::Ppo.is_distributional());
        assert!(Algorithm::Dppo.is_ppo_style());
        assert!(!Algorithm::Da2c.is_ppo_style());
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let ok = AgentConfig::defaults(Algorithm::Dppo);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.rollout_length = 1;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.ppo_clip = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.gae.gamma = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.kappa = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalization_defaults_differ_by_style() {
        assert!(AgentConfig::defaults(Algorithm::Dppo).normalize_advantages);
        assert!(AgentConfig::defaults(Algorithm::Ppo).normalize_advantages);
        assert!(!AgentConfig::defaults(Algorithm::Da2c).normalize_advantages);
        assert!(!AgentConfig::defaults(Algorithm::A2c).normalize_advantages);
    }

    #[test]
    fn scalar_agents_get_a_single_quantile_head() {
        let mut rng = crate::rng::derive(1, 0);
        let a = Agent::new(AgentConfig::defaults(Algorithm::Ppo), 2, 1, 8, 32, &mut rng).unwrap();
        assert_eq!(a.n_quantiles(), 1);
        let d = Agent::new(AgentConfig::defaults(Algorithm::Dppo), 2, 1, 8, 32, &mut rng).unwrap();
        assert_eq!(d.n_quantiles(), 32);
    }

    #[test]
    fn advantage_wiring_uses_the_configured_source() {
        // Sentinel buffer where scalar values disagree with quantile means:
        // the two estimators must return different numbers and each
        // algorithm must pick its own.
        use crate::quantdist::QuantileDistribution;
        use std::collections::BTreeMap;

        let qd = |v: &[f64]| QuantileDistribution::new(v.to_vec()).unwrap();
        let buffer = RolloutBuffer {
            transitions: vec![crate::advantage::Transition {
                state: vec![0.0],
                action: vec![0.0],
                reward: 1.0,
                next_state: vec![1.0],
                done: false,
                truncated: false,
            }],
            value_dists: vec![qd(&[1.0]), qd(&[2.0])],
            scalar_values: Some(vec![100.0, 50.0]),
            log_probs: vec![0.0],
            truncation_bootstraps: BTreeMap::new(),
        };
        let mut rng = crate::rng::derive(2, 0);
        let mut mk = |alg| {
            let mut cfg = AgentConfig::defaults(alg);
            cfg.gae = GaeParams { gamma: 0.5, lambda: 0.5 };
            Agent::new(cfg, 1, 1, 4, 1, &mut rng).unwrap()
        };
        let dist_adv = mk(Algorithm::Da2c).compute_advantages(&buffer).unwrap();
        let scal_adv = mk(Algorithm::A2c).compute_advantages(&buffer).unwrap();
        let dppo_adv = mk(Algorithm::Dppo).compute_advantages(&buffer).unwrap();
        let ppo_adv = mk(Algorithm::Ppo).compute_advantages(&buffer).unwrap();
        // DGAE sees 1 + 0.5*2 - 1 = 1; scalar GAE sees 1 + 0.5*50 - 100 = -74.
        let expect_dist = dgae(&buffer, &GaeParams { gamma: 0.5, lambda: 0.5 }).unwrap();
        let expect_scal = scalar_gae(&buffer, &GaeParams { gamma: 0.5, lambda: 0.5 }).unwrap();
        assert_eq!(dist_adv, expect_dist);
        assert_eq!(dppo_adv, expect_dist);
        assert_eq!(scal_adv, expect_scal);
        assert_eq!(ppo_adv, expect_scal);
        assert_ne!(dist_adv, scal_adv, "sentinel buffer must separate the sources");
    }
}

//! A K-state slippery chain with stochastic rewards.
//!
//! States are `0..K-1`; state `K-1` is terminal (the right end). The agent
//! emits a 1-D real action whose sign selects the intended direction; with
//! probability `slip_prob` the realized move is reversed. Moves past the
//! left edge stay at state 0. Rewards are drawn from a per-(state, intended
//! direction) law, so the reward is a function of `(s, a)` while the slip
//! only affects the transition. Every transition and reward law is exposed
//! so the enumeration oracle can reproduce them exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EnvError, EnvSpec, Environment, StepResult};

/// Reward law attached to a (state, direction) pair.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardLaw {
    Constant(f64),
    /// `hi` with probability `p_hi`, otherwise `lo`.
    TwoAtom { lo: f64, hi: f64, p_hi: f64 },
    /// Gaussian rejected outside `[lo, hi]`.
    TruncatedGaussian { mean: f64, std: f64, lo: f64, hi: f64 },
}

impl RewardLaw {
    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            RewardLaw::Constant(c) if c.is_finite() => Ok(()),
            RewardLaw::Constant(c) => Err(EnvError::InvalidConfig(format!(
                "constant reward must be finite, got {c}"
            ))),
            RewardLaw::TwoAtom { lo, hi, p_hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(EnvError::InvalidConfig(format!(
                        "two-atom law needs finite lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                if !(0.0..=1.0).contains(p_hi) {
                    return Err(EnvError::InvalidConfig(format!(
                        "two-atom probability must lie in [0,1], got {p_hi}"
                    )));
                }
                Ok(())
            }
            RewardLaw::TruncatedGaussian { mean, std, lo, hi } => {
                if !(mean.is_finite() && std.is_finite() && *std > 0.0 && lo < hi) {
                    return Err(EnvError::InvalidConfig(
                        "truncated gaussian needs finite mean, std > 0 and lo < hi".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            RewardLaw::Constant(c) => (*c, *c),
            RewardLaw::TwoAtom { lo, hi, .. } => (*lo, *hi),
            RewardLaw::TruncatedGaussian { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// `(value, probability)` atoms, if the law is finitely supported.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            RewardLaw::Constant(c) => Some(vec![(*c, 1.0)]),
            RewardLaw::TwoAtom { lo, hi, p_hi } => {
                if *p_hi == 0.0 {
                    Some(vec![(*lo, 1.0)])
                } else if *p_hi == 1.0 {
                    Some(vec![(*hi, 1.0)])
                } else {
                    Some(vec![(*lo, 1.0 - p_hi), (*hi, *p_hi)])
                }
            }
            RewardLaw::TruncatedGaussian { .. } => None,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            RewardLaw::Constant(c) => *c,
            RewardLaw::TwoAtom { lo, hi, p_hi } => {
                if rng.random::<f64>() < *p_hi {
                    *hi
                } else {
                    *lo
                }
            }
            RewardLaw::TruncatedGaussian { mean, std, lo, hi } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let v = mean + std * z;
                if v >= *lo && v <= *hi {
                    return v;
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Number of states including the terminal right end; `K >= 2`.
    pub num_states: usize,
    pub slip_prob: f64,
    /// Reward law per nonterminal state for the intended-right action.
    pub reward_right: Vec<RewardLaw>,
    /// Reward law per nonterminal state for the intended-left action.
    pub reward_left: Vec<RewardLaw>,
    pub max_episode_steps: usize,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.num_states < 2 {
            return Err(EnvError::InvalidConfig(format!(
                "chain needs at least 2 states, got {}",
                self.num_states
            )));
        }
        if !(0.0..=0.5).contains(&self.slip_prob) {
            return Err(EnvError::InvalidConfig(format!(
                "slip probability must lie in [0, 0.5], got {}",
                self.slip_prob
            )));
        }
        let nonterminal = self.num_states - 1;
        if self.reward_right.len() != nonterminal || self.reward_left.len() != nonterminal {
            return Err(EnvError::InvalidConfig(format!(
                "need one reward law per nonterminal state ({nonterminal}), got {} right / {} left",
                self.reward_right.len(),
                self.reward_left.len()
            )));
        }
        if self.max_episode_steps == 0 {
            return Err(EnvError::InvalidConfig("max_episode_steps must be positive".into()));
        }
        for law in self.reward_right.iter().chain(&self.reward_left) {
            law.validate()?;
        }
        Ok(())
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for law in self.reward_right.iter().chain(&self.reward_left) {
            let (l, h) = law.bounds();
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// Uniform chain: the same step laws everywhere, plus a dedicated law on
    /// the right action of the state adjacent to the goal.
    pub fn uniform(
        num_states: usize,
        slip_prob: f64,
        step_right: RewardLaw,
        step_left: RewardLaw,
        goal: RewardLaw,
        max_episode_steps: usize,
    ) -> Result<Self, EnvError> {
        if num_states < 2 {
            return Err(EnvError::InvalidConfig("chain needs at least 2 states".into()));
        }
        let nonterminal = num_states - 1;
        let mut reward_right = vec![step_right; nonterminal];
        reward_right[nonterminal - 1] = goal;
        let cfg = Self {
            num_states,
            slip_prob,
            reward_right,
            reward_left: vec![step_left; nonterminal],
            max_episode_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One-hot encoding of a chain state index.
pub fn one_hot(index: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[index] = 1.0;
    v
}

/// Inverse of [`one_hot`]: index of the largest component.
pub fn state_index(state: &[f64]) -> usize {
    state
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub struct ChainMdp {
    config: ChainConfig,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    state: usize,
    steps: usize,
}

impl ChainMdp {
    pub fn new(config: ChainConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let (r_min, r_max) = config.reward_bounds();
        let spec = EnvSpec {
            state_dim: config.num_states,
            action_dim: 1,
            r_min,
            r_max,
            max_episode_steps: config.max_episode_steps,
        };
        Ok(Self {
            config,
            spec,
            rng: crate::rng::derive(seed, 0),
            state: 0,
            steps: 0,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn current_index(&self) -> usize {
        self.state
    }
}

impl Environment for ChainMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = 0;
        self.steps = 0;
        one_hot(self.state, self.config.num_states)
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let k = self.config.num_states;
        debug_assert!(self.state < k - 1, "stepping a finished episode");
        let right = action[0] >= 0.0;
        let law = if right {
            &self.config.reward_right[self.state]
        } else {
            &self.config.reward_left[self.state]
        };
        let reward = law.sample(&mut self.rng);
        let slipped = self.rng.random::<f64>() < self.config.slip_prob;
        let move_right = right != slipped;
        let next = if move_right {
            self.state + 1
        } else {
            self.state.saturating_sub(1)
        };
        self.steps += 1;
        self.state = next;
        let done = next == k - 1;
        let truncated = !done && self.steps >= self.config.max_episode_steps;
        StepResult {
            next_state: one_hot(next, k),
            reward,
            done,
            truncated,
        }
    }

    fn set_state(&mut self, state: &[f64]) {
        self.state = state_index(state);
        self.steps = 0;
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = crate::rng::derive(seed, 0);
    }
}

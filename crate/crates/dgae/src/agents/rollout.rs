//! On-policy rollout collection and deterministic-policy evaluation.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::advantage::{RolloutBuffer, Transition};
use crate::envs::Environment;

use super::{Agent, AgentError};

impl Agent {
    /// Sample `length` steps from `env` starting at `*cur_state`, recording
    /// value predictions for every visited state plus the bootstrap
    /// prediction at index `length`. Episode ends are handled internally:
    /// the environment is reset and collection continues, with truncation
    /// bootstraps recorded at the pre-reset successor state. `cur_state` is
    /// left at the state the next rollout should start from.
    pub fn collect_rollout(
        &self,
        env: &mut dyn Environment,
        cur_state: &mut Vec<f64>,
        length: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<RolloutBuffer, AgentError> {
        let scalar = !self.config().algorithm.is_distributional();
        let mut transitions = Vec::with_capacity(length);
        let mut value_dists = Vec::with_capacity(length + 1);
        let mut log_probs = Vec::with_capacity(length);
        let mut truncation_bootstraps = BTreeMap::new();

        for t in 0..length {
            let state = cur_state.clone();
            value_dists.push(self.value_net.predict(&state)?);
            let action = self.policy.sample_action(&state, rng);
            let logp = self.policy.log_prob_value(&state, &action);
            let sr = env.step(&action);
            transitions.push(Transition {
                state,
                action,
                reward: sr.reward,
                next_state: sr.next_state.clone(),
                done: sr.done,
                truncated: sr.truncated,
            });
            log_probs.push(logp);
            if sr.truncated {
                truncation_bootstraps.insert(t, self.value_net.predict(&sr.next_state)?);
            }
            *cur_state = if sr.done || sr.truncated {
                env.reset()
            } else {
                sr.next_state
            };
        }
        value_dists.push(self.value_net.predict(cur_state)?);

        let scalar_values = if scalar {
            Some(value_dists.iter().map(|d| d.mean()).collect())
        } else {
            None
        };
        let buffer = RolloutBuffer {
            transitions,
            value_dists,
            scalar_values,
            log_probs,
            truncation_bootstraps,
        };
        buffer.validate()?;
        Ok(buffer)
    }
}

/// Mean and population std of the undiscounted return of the deterministic
/// (mean-action) policy over `episodes` episodes.
pub fn evaluate_policy(
    policy: &crate::nn::GaussianPolicy,
    env: &mut dyn Environment,
    episodes: usize,
) -> (f64, f64) {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset();
        let mut total = 0.0;
        loop {
            let (mu, _) = policy.mean_and_std(&state);
            let sr = env.step(&mu);
            total += sr.reward;
            state = sr.next_state;
            if sr.done || sr.truncated {
                break;
            }
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / returns.len() as f64;
    (mean, var.sqrt())
}

//! Diagonal-Gaussian policy head.
//!
//! The mean comes from an [`Mlp`]; the log standard deviation is either a
//! state-independent parameter vector (default) or an extra head of the
//! same network (`state_dependent_std`). Log-stds are clamped to
//! `[LOG_STD_MIN, LOG_STD_MAX]` wherever they are used; the clamp gates the
//! gradient to zero outside the band, exactly as finite differences see it.
//!
//! The flat parameter convention is `[mlp params..., log_std params...]`
//! (the second block is empty in state-dependent mode), which is the layout
//! `log_prob` and `entropy` gradients come back in.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::{Mlp, MlpShape};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_net: Mlp,
    log_std: Vec<f64>,
    state_dependent_std: bool,
    action_dim: usize,
}

impl GaussianPolicy {
    /// Orthogonal init with the mean head scaled down to 0.01 so early
    /// policies stay near zero mean; log-std starts at -0.5.
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        state_dependent_std: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let output = if state_dependent_std { 2 * action_dim } else { action_dim };
        let shape = MlpShape { input: state_dim, hidden, output };
        let mut policy = Self {
            mean_net: Mlp::init(shape, rng, 0.01),
            log_std: if state_dependent_std { Vec::new() } else { vec![-0.5; action_dim] },
            state_dependent_std,
            action_dim,
        };
        if state_dependent_std {
            // Bias the log-std head to the same -0.5 starting point.
            let b3_start = policy.mean_net.params().len() - output + action_dim;
            for k in 0..action_dim {
                policy.mean_net.params_mut()[b3_start + k] = -0.5;
            }
        }
        policy
    }

    pub fn from_parts(mean_net: Mlp, log_std: Vec<f64>, state_dependent_std: bool, action_dim: usize) -> Self {
        Self { mean_net, log_std, state_dependent_std, action_dim }
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn state_dependent_std(&self) -> bool {
        self.state_dependent_std
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn param_count(&self) -> usize {
        self.mean_net.params().len() + self.log_std.len()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.mean_net.params().to_vec();
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let split = self.mean_net.params().len();
        assert_eq!(params.len(), split + self.log_std.len(), "parameter count mismatch");
        self.mean_net.set_params(&params[..split]);
        self.log_std.copy_from_slice(&params[split..]);
    }

    /// Mean vector, clamped log-stds, and the raw (pre-clamp) log-stds.
    fn heads(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let out = self.mean_net.forward(state);
        if self.state_dependent_std {
            let mu = out[..self.action_dim].to_vec();
            let raw = out[self.action_dim..].to_vec();
            let ls = raw.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
            (mu, ls, raw)
        } else {
            let raw = self.log_std.clone();
            let ls = raw.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
            (out, ls, raw)
        }
    }

    /// Mean action and per-dimension standard deviation at `state`.
    pub fn mean_and_std(&self, state: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mu, ls, _) = self.heads(state);
        let std = ls.iter().map(|v| v.exp()).collect();
        (mu, std)
    }

    /// `mu + sigma * z`, `z` standard normal from the caller's stream.
    pub fn sample_action(&self, state: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (mu, std) = self.mean_and_std(state);
        mu.iter()
            .zip(&std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect()
    }

    /// Log density of `action` under the policy at `state`.
    pub fn log_prob_value(&self, state: &[f64], action: &[f64]) -> f64 {
        let (mu, ls, _) = self.heads(state);
        let mut logp = 0.0;
        for d in 0..self.action_dim {
            let sigma = ls[d].exp();
            let z = (action[d] - mu[d]) / sigma;
            logp += -0.5 * z * z - ls[d] - 0.5 * LN_2PI;
        }
        logp
    }

    /// Log density and its exact gradient with respect to the flat
    /// parameter vector.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(action.len(), self.action_dim, "action dimension mismatch");
        let (mu, ls, raw) = self.heads(state);
        let mut logp = 0.0;
        let mut dmu = vec![0.0; self.action_dim];
        let mut dls = vec![0.0; self.action_dim];
        for d in 0..self.action_dim {
            let sigma = ls[d].exp();
            let z = (action[d] - mu[d]) / sigma;
            logp += -0.5 * z * z - ls[d] - 0.5 * LN_2PI;
            dmu[d] = z / sigma;
            // Gradient w.r.t. the raw parameter is gated by the clamp.
            let inside = raw[d] > LOG_STD_MIN && raw[d] < LOG_STD_MAX;
            dls[d] = if inside { z * z - 1.0 } else { 0.0 };
        }
        let mut grad = if self.state_dependent_std {
            let mut og = dmu;
            og.extend_from_slice(&dls);
            self.mean_net.backward(state, &og)
        } else {
            self.mean_net.backward(state, &dmu)
        };
        if !self.state_dependent_std {
            grad.extend_from_slice(&dls);
        }
        (logp, grad)
    }

    /// Differential entropy `sum_d (log_std_d + 0.5 (1 + ln 2 pi))` and its
    /// gradient with respect to the flat parameter vector.
    pub fn entropy(&self, state: &[f64]) -> (f64, Vec<f64>) {
        let (_, ls, raw) = self.heads(state);
        let h: f64 = ls.iter().map(|l| l + 0.5 * (1.0 + LN_2PI)).sum();
        let gate: Vec<f64> = raw
            .iter()
            .map(|&r| if r > LOG_STD_MIN && r < LOG_STD_MAX { 1.0 } else { 0.0 })
            .collect();
        if self.state_dependent_std {
            let mut og = vec![0.0; self.action_dim];
            og.extend_from_slice(&gate);
            (h, self.mean_net.backward(state, &og))
        } else {
            let mut grad = vec![0.0; self.mean_net.params().len()];
            grad.extend_from_slice(&gate);
            (h, grad)
        }
    }
}

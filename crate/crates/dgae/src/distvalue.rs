//! Distributional Bellman targets and the quantile-Huber regression loss
//! with its analytic gradient.
//!
//! The Bellman target of a transition is the quantile vector of
//! `r + gamma * G(s')` (elementwise affine map of the successor's
//! quantiles), or the constant vector `r` on termination. Targets are plain
//! values: no gradient flows through them.
//!
//! The regression loss between a predicted quantile vector `p` and a target
//! `t` is
//!
//! ```text
//! L = (1/N^2) * sum_i sum_j |q_i - 1{u_ij < 0}| * huber_k(u_ij),
//! u_ij = t_j - p_i,
//! huber_k(u) = u^2 / 2           if |u| <= k,
//!              k * (|u| - k/2)   otherwise,
//! ```
//!
//! whose exact derivative with respect to `p_i` is
//! `-(1/N^2) * sum_j |q_i - 1{u_ij < 0}| * clamp(u_ij, -k, k)`. Ties at the
//! Huber kink `|u| = k` take the quadratic branch; both branches agree there
//! in value and slope.

use rand_chacha::ChaCha8Rng;

use crate::envs::Environment;
use crate::quantdist::{QuantError, QuantileDistribution, QuantileFractions};

/// Huber threshold `kappa` (in return units) for the quantile regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileHuberParams {
    kappa: f64,
}

impl QuantileHuberParams {
    pub fn new(kappa: f64) -> Result<Self, QuantError> {
        if kappa <= 0.0 || !kappa.is_finite() || kappa.is_nan() {
            return Err(QuantError::NonPositiveScale { eta: kappa });
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Default for QuantileHuberParams {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

/// Quantiles of `r + gamma * G(s')`, or the constant vector `r` when the
/// transition terminated. The output is a fixed regression target.
pub fn bellman_target(
    reward: f64,
    g_next: &QuantileDistribution,
    gamma: f64,
    done: bool,
) -> QuantileDistribution {
    assert!(
        gamma > 0.0 && gamma.is_finite(),
        "bellman discount must be positive and finite, got {gamma}"
    );
    if done {
        QuantileDistribution::constant(reward, g_next.len())
            .expect("terminal target over a valid distribution")
    } else {
        g_next
            .scale(gamma)
            .expect("positive discount cannot fail to scale")
            .shift(reward)
    }
}

/// Quantile-Huber loss and its exact gradient with respect to `predicted`.
pub fn quantile_huber_loss(
    predicted: &QuantileDistribution,
    target: &QuantileDistribution,
    fractions: &QuantileFractions,
    params: &QuantileHuberParams,
) -> Result<(f64, Vec<f64>), QuantError> {
    let n = predicted.len();
    if target.len() != n {
        return Err(QuantError::DimensionMismatch { left: n, right: target.len() });
    }
    if fractions.len() != n {
        return Err(QuantError::DimensionMismatch { left: n, right: fractions.len() });
    }
    let kappa = params.kappa();
    let qs = fractions.as_slice();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for (i, (&p, &q)) in predicted.values().iter().zip(qs).enumerate() {
        let mut loss_i = 0.0;
        let mut grad_i = 0.0;
        for &t in target.values() {
            let u = t - p;
            let weight = if u < 0.0 { 1.0 - q } else { q };
            let huber = if u.abs() <= kappa {
                0.5 * u * u
            } else {
                kappa * (u.abs() - 0.5 * kappa)
            };
            loss_i += weight * huber;
            grad_i -= weight * u.clamp(-kappa, kappa);
        }
        loss += loss_i;
        grad[i] = grad_i;
    }
    let norm = (n * n) as f64;
    loss /= norm;
    for g in grad.iter_mut() {
        *g /= norm;
    }
    Ok((loss, grad))
}

/// Monte Carlo estimate of the discounted-return distribution from `state`:
/// order statistics of `samples` independent policy rollouts, each of at
/// most `horizon` steps. Time-limit truncation is ignored (the oracle
/// targets the infinite-horizon return); termination stops a rollout.
/// Test-support code, not part of the learning path.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy_distribution<E, P>(
    env: &mut E,
    mut policy: P,
    state: &[f64],
    gamma: f64,
    horizon: usize,
    samples: usize,
    n_quantiles: usize,
    rng: &mut ChaCha8Rng,
) -> Result<QuantileDistribution, QuantError>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
{
    let mut returns = Vec::with_capacity(samples);
    for _ in 0..samples {
        env.set_state(state);
        let mut s = state.to_vec();
        let mut acc = 0.0;
        let mut disc = 1.0;
        for _ in 0..horizon {
            let action = policy(&s, rng);
            let sr = env.step(&action);
            acc += disc * sr.reward;
            disc *= gamma;
            s = sr.next_state;
            if sr.done {
                break;
            }
        }
        returns.push(acc);
    }
    QuantileDistribution::from_samples(&returns, n_quantiles)
}

//! Minimal feed-forward function approximation with exact reverse-mode
//! gradients.
//!
//! The topology is fixed: input -> hidden -> hidden -> output, tanh hidden
//! activations, linear output. Parameters live in one flat `Vec<f64>`
//! (row-major weight blocks interleaved with bias blocks), which keeps the
//! optimizer, finite-difference checks and checkpointing trivial. Everything
//! is plain scalar f64 code: identical inputs produce bitwise-identical
//! outputs and gradients.

mod adam;
pub mod checkpoint;
mod mlp;
mod policy;

pub use adam::Adam;
pub use mlp::{orthogonal_init, Mlp, MlpShape};
pub use policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};

use crate::quantdist::{QuantError, QuantileDistribution};

/// Value-distribution head: an [`Mlp`] whose raw outputs are sorted
/// ascending before use as quantiles, so the monotonicity invariant holds
/// even when the network crosses quantiles. Gradients are routed back
/// through the sorting permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileValueNet {
    mlp: Mlp,
}

impl QuantileValueNet {
    pub fn new(mlp: Mlp) -> Self {
        Self { mlp }
    }

    pub fn init(
        state_dim: usize,
        n_quantiles: usize,
        hidden: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let shape = MlpShape {
            input: state_dim,
            hidden,
            output: n_quantiles,
        };
        Self { mlp: Mlp::init(shape, rng, 1.0) }
    }

    pub fn n_quantiles(&self) -> usize {
        self.mlp.shape().output
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// Predicted quantile distribution at `state` (sorted raw outputs).
    /// A non-finite network output surfaces as a [`QuantError`], which the
    /// agents turn into a diagnostic abort.
    pub fn predict(&self, state: &[f64]) -> Result<QuantileDistribution, QuantError> {
        Ok(self.predict_with_perm(state)?.0)
    }

    /// Prediction plus the sorting permutation `perm`, where
    /// `sorted[i] = raw[perm[i]]`. The permutation is what
    /// [`Self::backward_through_sort`] needs to route gradients.
    pub fn predict_with_perm(
        &self,
        state: &[f64],
    ) -> Result<(QuantileDistribution, Vec<usize>), QuantError> {
        let raw = self.mlp.forward(state);
        let mut perm: Vec<usize> = (0..raw.len()).collect();
        // Stable sort: already-sorted outputs pass through unchanged.
        perm.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap_or(std::cmp::Ordering::Equal));
        let sorted: Vec<f64> = perm.iter().map(|&i| raw[i]).collect();
        Ok((QuantileDistribution::new(sorted)?, perm))
    }

    /// Parameter gradients of `sum_i grad_sorted[i] * sorted_output[i]`.
    pub fn backward_through_sort(
        &self,
        state: &[f64],
        grad_sorted: &[f64],
        perm: &[usize],
    ) -> Vec<f64> {
        let mut raw_grad = vec![0.0; grad_sorted.len()];
        for (i, &src) in perm.iter().enumerate() {
            raw_grad[src] = grad_sorted[i];
        }
        self.mlp.backward(state, &raw_grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sorting_is_idempotent_and_transparent_for_sorted_outputs() {
        let mut rng = crate::rng::derive(1, 0);
        let net = QuantileValueNet::init(3, 8, 8, &mut rng);
        let state = [0.3, -0.2, 0.9];
        let (d, perm) = net.predict_with_perm(&state).unwrap();
        // Re-sorting the sorted output changes nothing.
        let mut again = d.values().to_vec();
        again.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(again, d.values());
        // Raw output recovered by inverting the permutation.
        let raw = net.mlp().forward(&state);
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(d.values()[i], raw[src]);
        }
    }

    #[test]
    fn gradients_flow_through_the_permutation() {
        // Finite differences across the full sorted pipeline. Networks with
        // nearly tied outputs are skipped: a tie flip under perturbation
        // invalidates the comparison.
        let mut rng = crate::rng::derive(2, 0);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 20 {
            let net = QuantileValueNet::init(2, 6, 6, &mut rng);
            let state = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let raw = net.mlp().forward(&state);
            let mut sorted = raw.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let min_gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            if min_gap < 1e-3 {
                continue;
            }
            let grad_out: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, perm) = net.predict_with_perm(&state).unwrap();
            let analytic = net.backward_through_sort(&state, &grad_out, &perm);
            let mut net_mut = net.clone();
            for k in 0..net_mut.mlp().params().len() {
                let orig = net_mut.mlp().params()[k];
                net_mut.mlp_mut().params_mut()[k] = orig + h;
                let fp: f64 = {
                    let (d, _) = net_mut.predict_with_perm(&state).unwrap();
                    d.values().iter().zip(&grad_out).map(|(v, g)| v * g).sum()
                };
                net_mut.mlp_mut().params_mut()[k] = orig - h;
                let fm: f64 = {
                    let (d, _) = net_mut.predict_with_perm(&state).unwrap();
                    d.values().iter().zip(&grad_out).map(|(v, g)| v * g).sum()
                };
                net_mut.mlp_mut().params_mut()[k] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs());
                assert!(
                    (analytic[k] - fd).abs() <= 1e-8 || (analytic[k] - fd).abs() / denom < 1e-4,
                    "param {k}: analytic {} vs fd {fd}",
                    analytic[k]
                );
            }
            checked += 1;
        }
    }
}

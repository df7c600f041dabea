//! Distributional TD errors and the DGAE estimator over rollouts, plus the
//! scalar GAE baseline.
//!
//! The distributional TD error of a step is
//! `delta = r + d(gamma * G(s'), G(s))` with `d` the directional metric;
//! terminal steps replace the bootstrap with the zero distribution, giving
//! `delta = r - mean(G(s))`. The DGAE advantage is the exponentially
//! weighted tail sum `A_t = sum_k (gamma*lambda)^k * delta_{t+k}`, computed
//! by the backward recursion `A_t = delta_t + gamma*lambda*(1-boundary_t)*A_{t+1}`.
//! The sum truncates at episode boundaries and at the buffer end, where the
//! stored bootstrap distribution absorbs the tail.
//!
//! Episode ends distinguish termination from time-limit truncation. Both
//! reset the recursion (the next buffer entry belongs to a new episode), but
//! a truncated step still bootstraps from the value distribution predicted
//! at its true successor state, which the collector records in
//! [`RolloutBuffer::truncation_bootstraps`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::quantdist::{directional_metric, QuantError, QuantileDistribution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdvantageError {
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("gae parameter {name} must lie strictly inside (0, 1), got {value}")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("buffer needs len(transitions)+1 value distributions: {transitions} transitions, {dists} distributions")]
    BufferShape { transitions: usize, dists: usize },
    #[error("scalar values length {got} does not match transitions+1 = {expected}")]
    ScalarShape { expected: usize, got: usize },
    #[error("buffer has no scalar values")]
    MissingScalarValues,
    #[error("step {index} is truncated but has no recorded bootstrap distribution")]
    MissingTruncationBootstrap { index: usize },
    #[error("n-step window [{start}, {start}+{n}) exceeds buffer length {len}")]
    WindowOutOfRange { start: usize, n: usize, len: usize },
    #[error("episode boundary at step {index} lies strictly inside the n-step window")]
    BoundaryInWindow { index: usize },
    #[error("n-step window must contain at least one step")]
    EmptyWindow,
}

/// One environment step as sampled by the behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True termination: the return-to-go past this step is exactly zero.
    pub done: bool,
    /// Time-limit cut: the episode ended but the value tail still exists.
    pub truncated: bool,
}

/// A rollout of `T` transitions with the value predictions recorded at
/// collection time.
///
/// `value_dists[t]` is the prediction at the state where action `t` was
/// taken; `value_dists[T]` is the bootstrap prediction at the state the
/// rollout stopped in. `scalar_values` mirrors them for the scalar baseline
/// agents. `log_probs` holds the behavior policy's log density of each
/// action, as required by the clipped-surrogate update.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub value_dists: Vec<QuantileDistribution>,
    pub scalar_values: Option<Vec<f64>>,
    pub log_probs: Vec<f64>,
    /// Value prediction at the pre-reset successor of each truncated step.
    pub truncation_bootstraps: BTreeMap<usize, QuantileDistribution>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn validate(&self) -> Result<(), AdvantageError> {
        let t = self.transitions.len();
        if self.value_dists.len() != t + 1 {
            return Err(AdvantageError::BufferShape {
                transitions: t,
                dists: self.value_dists.len(),
            });
        }
        let n = self.value_dists[0].len();
        for d in &self.value_dists {
            if d.len() != n {
                return Err(QuantError::DimensionMismatch { left: n, right: d.len() }.into());
            }
        }
        if let Some(sv) = &self.scalar_values {
            if sv.len() != t + 1 {
                return Err(AdvantageError::ScalarShape { expected: t + 1, got: sv.len() });
            }
        }
        for (&idx, d) in &self.truncation_bootstraps {
            if idx >= t {
                return Err(AdvantageError::MissingTruncationBootstrap { index: idx });
            }
            if d.len() != n {
                return Err(QuantError::DimensionMismatch { left: n, right: d.len() }.into());
            }
        }
        Ok(())
    }

    fn bootstrap_for(&self, t: usize) -> Result<&QuantileDistribution, AdvantageError> {
        if self.transitions[t].truncated {
            self.truncation_bootstraps
                .get(&t)
                .ok_or(AdvantageError::MissingTruncationBootstrap { index: t })
        } else {
            Ok(&self.value_dists[t + 1])
        }
    }
}

/// Discount and smoothing parameters of the exponentially weighted
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeParams {
    pub gamma: f64,
    pub lambda: f64,
}

impl GaeParams {
    /// Validated constructor; both parameters must lie strictly inside
    /// (0, 1). The estimator functions themselves tolerate the closed-
    /// interval limits so that limit cases remain testable.
    pub fn new(gamma: f64, lambda: f64) -> Result<Self, AdvantageError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(AdvantageError::ParamOutOfRange { name: "gamma", value: gamma });
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(AdvantageError::ParamOutOfRange { name: "lambda", value: lambda });
        }
        Ok(Self { gamma, lambda })
    }
}

/// One-step distributional TD error
/// `r + d(gamma * G(s'), G(s))`, or `r - mean(G(s))` on termination.
pub fn distributional_td_error(
    reward: f64,
    g_next: &QuantileDistribution,
    g_cur: &QuantileDistribution,
    gamma: f64,
    done: bool,
) -> Result<f64, AdvantageError> {
    if done {
        let zero = QuantileDistribution::zeros(g_cur.len())?;
        return Ok(reward + directional_metric(&zero, g_cur)?);
    }
    let scaled = g_next.scale(gamma)?;
    Ok(reward + directional_metric(&scaled, g_cur)?)
}

/// Distributional TD error of step `t` of a buffer, resolving termination
/// and truncation bootstraps.
fn td_error_at(buffer: &RolloutBuffer, t: usize, gamma: f64) -> Result<f64, AdvantageError> {
    let tr = &buffer.transitions[t];
    let g_next = if tr.done {
        // Unused by the terminal branch; any same-size distribution works.
        &buffer.value_dists[t]
    } else {
        buffer.bootstrap_for(t)?
    };
    distributional_td_error(tr.reward, g_next, &buffer.value_dists[t], gamma, tr.done)
}

fn scalar_td_error_at(
    buffer: &RolloutBuffer,
    values: &[f64],
    t: usize,
    gamma: f64,
) -> Result<f64, AdvantageError> {
    let tr = &buffer.transitions[t];
    let v_next = if tr.done {
        0.0
    } else if tr.truncated {
        buffer
            .truncation_bootstraps
            .get(&t)
            .ok_or(AdvantageError::MissingTruncationBootstrap { index: t })?
            .mean()
    } else {
        values[t + 1]
    };
    Ok(tr.reward + gamma * v_next - values[t])
}

/// n-step advantage: discounted window reward plus the directional
/// comparison of the `gamma^n`-scaled bootstrap against the start state's
/// distribution. Episode boundaries may only occur at the window's last
/// step, where termination switches to the zero bootstrap.
pub fn n_step_advantage(
    buffer: &RolloutBuffer,
    start: usize,
    n: usize,
    gamma: f64,
) -> Result<f64, AdvantageError> {
    buffer.validate()?;
    if n == 0 {
        return Err(AdvantageError::EmptyWindow);
    }
    if start + n > buffer.len() {
        return Err(AdvantageError::WindowOutOfRange { start, n, len: buffer.len() });
    }
    for k in 0..n - 1 {
        let tr = &buffer.transitions[start + k];
        if tr.done || tr.truncated {
            return Err(AdvantageError::BoundaryInWindow { index: start + k });
        }
    }
    let mut reward_sum = 0.0;
    let mut disc = 1.0;
    for k in 0..n {
        reward_sum += disc * buffer.transitions[start + k].reward;
        disc *= gamma;
    }
    let g_start = &buffer.value_dists[start];
    let last = &buffer.transitions[start + n - 1];
    let tail = if last.done {
        let zero = QuantileDistribution::zeros(g_start.len())?;
        directional_metric(&zero, g_start)?
    } else {
        let bootstrap = buffer.bootstrap_for(start + n - 1)?;
        directional_metric(&bootstrap.scale(disc)?, g_start)?
    };
    Ok(reward_sum + tail)
}

/// DGAE advantages for every step of the buffer, by backward recursion.
pub fn dgae(buffer: &RolloutBuffer, params: &GaeParams) -> Result<Vec<f64>, AdvantageError> {
    buffer.validate()?;
    let t_len = buffer.len();
    let mut advantages = vec![0.0; t_len];
    let mut acc = 0.0;
    for t in (0..t_len).rev() {
        let tr = &buffer.transitions[t];
        let delta = td_error_at(buffer, t, params.gamma)?;
        let carry = if tr.done || tr.truncated { 0.0 } else { acc };
        acc = delta + params.gamma * params.lambda * carry;
        advantages[t] = acc;
    }
    Ok(advantages)
}

/// Classic scalar GAE on `scalar_values`, with the same truncation rules as
/// [`dgae`].
pub fn scalar_gae(buffer: &RolloutBuffer, params: &GaeParams) -> Result<Vec<f64>, AdvantageError> {
    buffer.validate()?;
    let values = buffer
        .scalar_values
        .as_ref()
        .ok_or(AdvantageError::MissingScalarValues)?;
    let t_len = buffer.len();
    let mut advantages = vec![0.0; t_len];
    let mut acc = 0.0;
    for t in (0..t_len).rev() {
        let tr = &buffer.transitions[t];
        let delta = scalar_td_error_at(buffer, values, t, params.gamma)?;
        let carry = if tr.done || tr.truncated { 0.0 } else { acc };
        acc = delta + params.gamma * params.lambda * carry;
        advantages[t] = acc;
    }
    Ok(advantages)
}

//! Gradient updates: one full-batch actor-critic step (A2C style) and the
//! clipped-surrogate epoch loop (PPO style).
//!
//! Both styles share the value-target construction (one-step Bellman
//! targets, detached) and differ in how the policy objective is assembled.
//! Value regression is quantile-Huber for the distributional agents and
//! half squared error on the same targets' means for the scalar baselines,
//! so the only difference between paired agents is the distributional
//! machinery itself.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::advantage::RolloutBuffer;
use crate::distvalue::{bellman_target, quantile_huber_loss};
use crate::quantdist::QuantileDistribution;

use super::{check_finite_value, Agent, AgentError, UpdateDiagnostics};

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (dst, v) in acc.iter_mut().zip(x) {
        *dst += a * v;
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Zero-mean unit-std normalization over the whole rollout batch.
fn normalize(advantages: &mut [f64]) {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in advantages.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// Detached one-step Bellman targets for every step of the buffer.
fn value_targets(agent: &Agent, buffer: &RolloutBuffer) -> Result<Vec<QuantileDistribution>, AgentError> {
    let gamma = agent.config.gae.gamma;
    let mut targets = Vec::with_capacity(buffer.len());
    for (t, tr) in buffer.transitions.iter().enumerate() {
        let target = if tr.done {
            bellman_target(tr.reward, &buffer.value_dists[t], gamma, true)
        } else if tr.truncated {
            let bootstrap = buffer
                .truncation_bootstraps
                .get(&t)
                .ok_or(crate::advantage::AdvantageError::MissingTruncationBootstrap { index: t })?;
            bellman_target(tr.reward, bootstrap, gamma, false)
        } else {
            bellman_target(tr.reward, &buffer.value_dists[t + 1], gamma, false)
        };
        targets.push(target);
    }
    Ok(targets)
}

/// Mean value loss and parameter gradient over the indexed steps.
fn value_pass(
    agent: &Agent,
    buffer: &RolloutBuffer,
    targets: &[QuantileDistribution],
    indices: &[usize],
) -> Result<(f64, Vec<f64>), AgentError> {
    let mut loss_acc = 0.0;
    let mut grad = vec![0.0; agent.value_net.mlp().params().len()];
    let distributional = agent.config.algorithm.is_distributional();
    for &t in indices {
        let state = &buffer.transitions[t].state;
        if distributional {
            let (pred, perm) = agent.value_net.predict_with_perm(state)?;
            let (loss, gq) = quantile_huber_loss(&pred, &targets[t], &agent.fractions, &agent.huber)?;
            loss_acc += loss;
            let g = agent.value_net.backward_through_sort(state, &gq, &perm);
            axpy(&mut grad, 1.0, &g);
        } else {
            let v = agent.value_net.mlp().forward(state)[0];
            let u = v - targets[t].mean();
            loss_acc += 0.5 * u * u;
            let g = agent.value_net.mlp().backward(state, &[u]);
            axpy(&mut grad, 1.0, &g);
        }
    }
    let scale = 1.0 / indices.len() as f64;
    loss_acc *= scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    Ok((loss_acc, grad))
}

/// One full-batch actor-critic step.
pub(super) fn a2c_update(agent: &mut Agent, buffer: RolloutBuffer) -> Result<UpdateDiagnostics, AgentError> {
    buffer.validate()?;
    let t_len = buffer.len();
    let mut advantages = agent.compute_advantages(&buffer)?;
    for a in &advantages {
        check_finite_value("advantage", *a)?;
    }
    let mean_advantage = advantages.iter().sum::<f64>() / t_len as f64;
    if agent.config.normalize_advantages {
        normalize(&mut advantages);
    }

    // Policy: ascend sum_t A_t log pi(a_t | s_t) + entropy bonus.
    let ent_coef = agent.config.entropy_coef;
    let mut policy_loss = 0.0;
    let mut policy_grad = vec![0.0; agent.policy.param_count()];
    for (t, tr) in buffer.transitions.iter().enumerate() {
        let (logp, g) = agent.policy.log_prob(&tr.state, &tr.action);
        policy_loss -= advantages[t] * logp;
        axpy(&mut policy_grad, -advantages[t], &g);
        if ent_coef > 0.0 {
            let (h, gh) = agent.policy.entropy(&tr.state);
            policy_loss -= ent_coef * h;
            axpy(&mut policy_grad, -ent_coef, &gh);
        }
    }
    let scale = 1.0 / t_len as f64;
    policy_loss *= scale;
    for g in policy_grad.iter_mut() {
        *g *= scale;
    }

    let targets = value_targets(agent, &buffer)?;
    let all: Vec<usize> = (0..t_len).collect();
    let (value_loss, value_grad) = value_pass(agent, &buffer, &targets, &all)?;

    let policy_grad_norm = check_finite_value("policy gradient norm", l2_norm(&policy_grad))?;
    let value_grad_norm = check_finite_value("value gradient norm", l2_norm(&value_grad))?;
    check_finite_value("policy loss", policy_loss)?;
    check_finite_value("value loss", value_loss)?;

    let mut flat = agent.policy.flat_params();
    agent.adam_policy.step(&mut flat, &policy_grad, agent.config.policy_lr);
    agent.policy.set_flat_params(&flat);
    agent
        .adam_value
        .step(agent.value_net.mlp_mut().params_mut(), &value_grad, agent.config.value_lr);

    Ok(UpdateDiagnostics {
        iter: 0,
        timesteps: 0,
        policy_loss,
        value_loss,
        mean_advantage,
        policy_grad_norm,
        value_grad_norm,
        clip_fraction: None,
        mean_return_eval: None,
    })
}

/// Clipped-surrogate epochs over shuffled minibatches.
pub(super) fn ppo_update(
    agent: &mut Agent,
    buffer: RolloutBuffer,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateDiagnostics, AgentError> {
    buffer.validate()?;
    let t_len = buffer.len();
    let cfg = agent.config.clone();
    let mut advantages = agent.compute_advantages(&buffer)?;
    for a in &advantages {
        check_finite_value("advantage", *a)?;
    }
    let mean_advantage = advantages.iter().sum::<f64>() / t_len as f64;
    if cfg.normalize_advantages {
        normalize(&mut advantages);
    }
    let targets = value_targets(agent, &buffer)?;
    let eps = cfg.ppo_clip;

    let mut policy_loss_acc = 0.0;
    let mut value_loss_acc = 0.0;
    let mut policy_norm_acc = 0.0;
    let mut value_norm_acc = 0.0;
    let mut clipped_samples = 0usize;
    let mut total_samples = 0usize;
    let mut passes = 0usize;

    let mut indices: Vec<usize> = (0..t_len).collect();
    for _epoch in 0..cfg.ppo_epochs {
        indices.shuffle(rng);
        for mb in indices.chunks(cfg.minibatch_size) {
            // Policy minibatch pass.
            let mut policy_loss = 0.0;
            let mut policy_grad = vec![0.0; agent.policy.param_count()];
            for &t in mb {
                let tr = &buffer.transitions[t];
                let (logp, g) = agent.policy.log_prob(&tr.state, &tr.action);
                let ratio = (logp - buffer.log_probs[t]).exp();
                let adv = advantages[t];
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
                policy_loss -= unclipped.min(clipped);
                // The clipped branch is active (and the sample contributes
                // no gradient) when the ratio sits outside the band on the
                // side the advantage pushes toward.
                let clip_active =
                    (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
                if clip_active {
                    clipped_samples += 1;
                } else {
                    axpy(&mut policy_grad, -ratio * adv, &g);
                }
                if cfg.entropy_coef > 0.0 {
                    let (h, gh) = agent.policy.entropy(&tr.state);
                    policy_loss -= cfg.entropy_coef * h;
                    axpy(&mut policy_grad, -cfg.entropy_coef, &gh);
                }
            }
            let scale = 1.0 / mb.len() as f64;
            policy_loss *= scale;
            for g in policy_grad.iter_mut() {
                *g *= scale;
            }
            let (value_loss, value_grad) = value_pass(agent, &buffer, &targets, mb)?;

            check_finite_value("policy loss", policy_loss)?;
            check_finite_value("value loss", value_loss)?;
            let pn = check_finite_value("policy gradient norm", l2_norm(&policy_grad))?;
            let vn = check_finite_value("value gradient norm", l2_norm(&value_grad))?;

            let mut flat = agent.policy.flat_params();
            agent.adam_policy.step(&mut flat, &policy_grad, cfg.policy_lr);
            agent.policy.set_flat_params(&flat);
            agent
                .adam_value
                .step(agent.value_net.mlp_mut().params_mut(), &value_grad, cfg.value_lr);

            policy_loss_acc += policy_loss;
            value_loss_acc += value_loss;
            policy_norm_acc += pn;
            value_norm_acc += vn;
            total_samples += mb.len();
            passes += 1;
        }
    }

    let passes_f = passes as f64;
    Ok(UpdateDiagnostics {
        iter: 0,
        timesteps: 0,
        policy_loss: policy_loss_acc / passes_f,
        value_loss: value_loss_acc / passes_f,
        mean_advantage,
        policy_grad_norm: policy_norm_acc / passes_f,
        value_grad_norm: value_norm_acc / passes_f,
        clip_fraction: Some(clipped_samples as f64 / total_samples as f64),
        mean_return_eval: None,
    })
}

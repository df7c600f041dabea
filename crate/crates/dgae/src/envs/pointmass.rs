//! Continuous-control double integrator.
//!
//! State is `(position, velocity)`, the action a 1-D force clamped to
//! `[-1, 1]`, dynamics `x'' = a + noise` integrated semi-implicitly at a
//! fixed time step. The per-step reward is `-(x^2 + 0.1 a^2)` clipped to
//! `[r_min, 0]`. Episodes are cut after [`EPISODE_STEPS`] steps by
//! truncation, never termination, so value bootstrapping at the time limit
//! is exercised.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EnvSpec, Environment, StepResult};

pub const DT: f64 = 0.05;
pub const POS_LIMIT: f64 = 5.0;
pub const VEL_LIMIT: f64 = 5.0;
pub const ACTION_LIMIT: f64 = 1.0;
pub const EPISODE_STEPS: usize = 200;
/// Lower reward clip; with the position and action limits above the raw
/// cost never falls below it, so the clip only guards the declared bound.
pub const R_MIN: f64 = -(POS_LIMIT * POS_LIMIT + 0.1 * ACTION_LIMIT * ACTION_LIMIT);

pub struct PointMass {
    noise_std: f64,
    spec: EnvSpec,
    rng: ChaCha8Rng,
    x: f64,
    v: f64,
    steps: usize,
}

impl PointMass {
    pub fn new(noise_std: f64, seed: u64) -> Self {
        assert!(noise_std >= 0.0, "noise_std must be nonnegative");
        Self {
            noise_std,
            spec: EnvSpec {
                state_dim: 2,
                action_dim: 1,
                r_min: R_MIN,
                r_max: 0.0,
                max_episode_steps: EPISODE_STEPS,
            },
            rng: crate::rng::derive(seed, 0),
            x: 0.0,
            v: 0.0,
            steps: 0,
        }
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.x = self.rng.random_range(-1.0..=1.0);
        self.v = 0.0;
        self.steps = 0;
        vec![self.x, self.v]
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let a = action[0].clamp(-ACTION_LIMIT, ACTION_LIMIT);
        let noise: f64 = if self.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.noise_std * z
        } else {
            0.0
        };
        self.v = (self.v + (a + noise) * DT).clamp(-VEL_LIMIT, VEL_LIMIT);
        self.x = (self.x + self.v * DT).clamp(-POS_LIMIT, POS_LIMIT);
        self.steps += 1;
        let reward = (-(self.x * self.x + 0.1 * a * a)).clamp(R_MIN, 0.0);
        StepResult {
            next_state: vec![self.x, self.v],
            reward,
            done: false,
            truncated: self.steps >= EPISODE_STEPS,
        }
    }

    fn set_state(&mut self, state: &[f64]) {
        self.x = state[0].clamp(-POS_LIMIT, POS_LIMIT);
        self.v = state[1].clamp(-VEL_LIMIT, VEL_LIMIT);
        self.steps = 0;
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = crate::rng::derive(seed, 0);
    }
}

/// Feedback gains `(k_x, k_v)` for `u = -(k_x x + k_v v)`, from iterating
/// the discrete Riccati recursion of the noiseless dynamics with the cost
/// `x^2 + 0.1 u^2`. Used only as a measured near-optimal reference.
pub fn lqr_gains() -> (f64, f64) {
    // x' = A x + B u with A = [[1, dt], [0, 1]], B = [dt^2, dt].
    let (a11, a12, a21, a22) = (1.0, DT, 0.0, 1.0);
    let (b1, b2) = (DT * DT, DT);
    let (q11, q22) = (1.0, 0.0);
    let r = 0.1;
    let (mut p11, mut p12, mut p22) = (q11, 0.0, q22);
    for _ in 0..200_000 {
        // K = (r + B'PB)^-1 B'PA
        let bpb = b1 * (p11 * b1 + p12 * b2) + b2 * (p12 * b1 + p22 * b2);
        let bpa1 = b1 * (p11 * a11 + p12 * a21) + b2 * (p12 * a11 + p22 * a21);
        let bpa2 = b1 * (p11 * a12 + p12 * a22) + b2 * (p12 * a12 + p22 * a22);
        let k1 = bpa1 / (r + bpb);
        let k2 = bpa2 / (r + bpb);
        // P <- Q + A'PA - A'PB K
        let pa11 = p11 * a11 + p12 * a21;
        let pa12 = p11 * a12 + p12 * a22;
        let pa21 = p12 * a11 + p22 * a21;
        let pa22 = p12 * a12 + p22 * a22;
        let apa11 = a11 * pa11 + a21 * pa21;
        let apa12 = a11 * pa12 + a21 * pa22;
        let apa22 = a12 * pa12 + a22 * pa22;
        let apb1 = a11 * (p11 * b1 + p12 * b2) + a21 * (p12 * b1 + p22 * b2);
        let apb2 = a12 * (p11 * b1 + p12 * b2) + a22 * (p12 * b1 + p22 * b2);
        let n11 = q11 + apa11 - apb1 * k1;
        let n12 = apa12 - apb1 * k2;
        let n22 = q22 + apa22 - apb2 * k2;
        let delta = (n11 - p11).abs().max((n12 - p12).abs()).max((n22 - p22).abs());
        p11 = n11;
        p12 = n12;
        p22 = n22;
        if delta < 1e-13 {
            break;
        }
    }
    let bpb = b1 * (p11 * b1 + p12 * b2) + b2 * (p12 * b1 + p22 * b2);
    let bpa1 = b1 * (p11 * a11 + p12 * a21) + b2 * (p12 * a11 + p22 * a21);
    let bpa2 = b1 * (p11 * a12 + p12 * a22) + b2 * (p12 * a12 + p22 * a22);
    (bpa1 / (r + bpb), bpa2 / (r + bpb))
}

fn episode_return(env: &mut PointMass, mut policy: impl FnMut(&[f64], &mut ChaCha8Rng) -> f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut state = env.reset();
    let mut total = 0.0;
    loop {
        let a = policy(&state, rng);
        let sr = env.step(&[a]);
        total += sr.reward;
        state = sr.next_state;
        if sr.done || sr.truncated {
            return total;
        }
    }
}

fn baseline(
    noise_std: f64,
    episodes: usize,
    seed: u64,
    policy: impl FnMut(&[f64], &mut ChaCha8Rng) -> f64 + Copy,
) -> (f64, f64) {
    let mut env = PointMass::new(noise_std, seed);
    let mut rng = crate::rng::derive(seed, 7);
    let returns: Vec<f64> = (0..episodes)
        .map(|_| episode_return(&mut env, policy, &mut rng))
        .collect();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / returns.len() as f64;
    (mean, var.sqrt())
}

/// Mean and std of the undiscounted return of a uniform-random policy.
pub fn random_policy_baseline(noise_std: f64, episodes: usize, seed: u64) -> (f64, f64) {
    baseline(noise_std, episodes, seed, |_, rng| rng.random_range(-1.0..=1.0))
}

/// Mean and std of the undiscounted return of the clamped LQR controller.
pub fn lqr_policy_baseline(noise_std: f64, episodes: usize, seed: u64) -> (f64, f64) {
    let (k1, k2) = lqr_gains();
    baseline(noise_std, episodes, seed, move |s, _| {
        (-(k1 * s[0] + k2 * s[1])).clamp(-ACTION_LIMIT, ACTION_LIMIT)
    })
}

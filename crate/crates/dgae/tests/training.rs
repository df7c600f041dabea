//! Cross-module training behavior: the bandit sanity check, the N = 1
//! equivalence between the distributional and scalar agents, and the
//! multi-seed record shape.

use dgae::advantage::GaeParams;
use dgae::agents::{Agent, AgentConfig, Algorithm};
use dgae::envs::chain::{one_hot, ChainConfig, ChainMdp, RewardLaw};
use dgae::envs::Environment;
use dgae::harness::{run_train, ExperimentConfig};
use dgae::rng::derive;

/// Two-state chain acting as a bandit: going right pays +1 and terminates,
/// going left pays -1 and truncates at the one-step limit.
fn bandit_env(seed: u64) -> ChainMdp {
    let cfg = ChainConfig {
        num_states: 2,
        slip_prob: 0.0,
        reward_right: vec![RewardLaw::Constant(1.0)],
        reward_left: vec![RewardLaw::Constant(-1.0)],
        max_episode_steps: 1,
    };
    ChainMdp::new(cfg, seed).unwrap()
}

#[test]
fn da2c_raises_the_probability_of_the_better_action() {
    let mut cfg = AgentConfig::defaults(Algorithm::Da2c);
    cfg.gae = GaeParams { gamma: 0.9, lambda: 0.9 };
    cfg.rollout_length = 64;
    cfg.policy_lr = 0.01;
    cfg.value_lr = 0.01;
    let mut rng = derive(100, 0);
    let mut agent = Agent::new(cfg, 2, 1, 8, 4, &mut rng).unwrap();
    let mut env = bandit_env(7);
    let mut state = env.reset();
    let mut act_rng = derive(101, 0);
    let mut upd_rng = derive(102, 0);

    let probe = one_hot(0, 2);
    // z = mu / sigma is monotone in P(action > 0).
    let z_of = |agent: &Agent| {
        let (mu, std) = agent.policy.mean_and_std(&probe);
        mu[0] / std[0]
    };
    let mut zs = vec![z_of(&agent)];
    for _ in 0..200 {
        let buffer = agent.collect_rollout(&mut env, &mut state, 64, &mut act_rng).unwrap();
        agent.update(buffer, &mut upd_rng).unwrap();
        zs.push(z_of(&agent));
    }
    let quarter = zs.len() / 4;
    let early: f64 = zs[..quarter].iter().sum::<f64>() / quarter as f64;
    let late: f64 = zs[zs.len() - quarter..].iter().sum::<f64>() / quarter as f64;
    assert!(
        late > early + 0.5,
        "preference for the +1 action should trend up: early {early:.3}, late {late:.3}"
    );
    // Final policy prefers the rewarded action outright.
    assert!(*zs.last().unwrap() > 0.0, "final z = {}", zs.last().unwrap());
}

#[test]
fn single_quantile_da2c_matches_a2c_updates() {
    // With one quantile and the Huber branch disabled (huge kappa), the
    // distributional machinery must collapse onto the scalar baseline: the
    // policy steps agree to 1e-8 and the value steps to 1e-6 (the factor
    // between the two value losses is absorbed by the optimizer's
    // per-parameter normalization).
    let mk_cfg = |alg| {
        let mut cfg = AgentConfig::defaults(alg);
        cfg.gae = GaeParams { gamma: 0.9, lambda: 0.8 };
        cfg.rollout_length = 32;
        cfg.kappa = 1e12;
        cfg
    };
    let mut rng_d = derive(200, 0);
    let mut rng_s = derive(200, 0);
    let mut da2c = Agent::new(mk_cfg(Algorithm::Da2c), 2, 1, 8, 1, &mut rng_d).unwrap();
    let mut a2c = Agent::new(mk_cfg(Algorithm::A2c), 2, 1, 8, 1, &mut rng_s).unwrap();
    assert_eq!(da2c.policy.flat_params(), a2c.policy.flat_params());
    assert_eq!(da2c.value_net.mlp().params(), a2c.value_net.mlp().params());

    for round in 0..3 {
        let collect = |agent: &Agent| {
            let mut env = dgae::envs::pointmass::PointMass::new(0.05, 50);
            let mut state = env.reset();
            let mut rng = derive(201 + round, 0);
            agent.collect_rollout(&mut env, &mut state, 32, &mut rng).unwrap()
        };
        let buf_d = collect(&da2c);
        let buf_s = collect(&a2c);
        for (a, b) in buf_d.transitions.iter().zip(&buf_s.transitions) {
            // Bitwise in round 0; later rounds carry the accumulated
            // sub-1e-8 drift of the parameter comparison below.
            assert!(
                (a.action[0] - b.action[0]).abs() < 1e-8,
                "paired agents must act identically: {} vs {}",
                a.action[0],
                b.action[0]
            );
        }
        da2c.update(buf_d, &mut derive(300, 0)).unwrap();
        a2c.update(buf_s, &mut derive(300, 0)).unwrap();

        let pd = da2c.policy.flat_params();
        let ps = a2c.policy.flat_params();
        for (x, y) in pd.iter().zip(&ps) {
            assert!((x - y).abs() < 1e-8, "policy step diverged: {x} vs {y}");
        }
        let vd = da2c.value_net.mlp().params();
        let vs = a2c.value_net.mlp().params();
        for (x, y) in vd.iter().zip(vs) {
            assert!((x - y).abs() < 1e-6, "value step diverged: {x} vs {y}");
        }
    }
}

#[test]
fn five_seed_runs_produce_aligned_per_seed_series() {
    let cfg = ExperimentConfig::parse_str(
        "\
env.name = pointmass
agent.algorithm = da2c
agent.rollout_length = 64
quantiles = 4
hidden = 8
total_timesteps = 128
eval_interval = 64
eval_episodes = 2
seeds = 1,2,3,4,5
",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_train(&cfg, dir.path(), 2).unwrap();
    assert_eq!(artifacts.seed_curves.len(), 5);
    assert_eq!(artifacts.final_means.len(), 5);
    // Aggregate has one row per shared evaluation mark.
    let agg = std::fs::read_to_string(&artifacts.aggregate).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2, "header plus evals at 64 and 128");
}

//! Multi-seed orchestration: run the training loop per seed (optionally in
//! parallel), write per-seed artifacts, and aggregate the curves.
//!
//! Seeds are isolated jobs; the aggregate is recomputed from the per-seed
//! CSV files after all jobs finish, so aggregate statistics stay a pure
//! function of the artifacts on disk.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::{self, AgentError, TrainRecord};
use crate::nn::checkpoint::{self, CheckpointError};
use crate::rng::{derive, stream};

use super::config::ExperimentConfig;
use super::csvio::{self, CsvError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("seed job panicked")]
    JobPanicked,
}

/// Paths of everything a training run wrote.
#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub seed_curves: Vec<PathBuf>,
    pub seed_diagnostics: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub aggregate: PathBuf,
    /// Final evaluation mean per seed, in `seeds` order.
    pub final_means: Vec<f64>,
    /// Final evaluation std (across episodes) per seed.
    pub final_stds: Vec<f64>,
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

/// Run every configured seed and write curves, diagnostics, checkpoints and
/// the aggregate under `out_dir`. `jobs` seeds run concurrently (each one a
/// fully isolated deterministic job); output files are identical for any
/// `jobs` value.
pub fn run_train(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<TrainArtifacts, HarnessError> {
    ensure_dir(out_dir)?;
    let jobs = jobs.max(1);
    let seeds = config.seeds.clone();
    let mut records: Vec<Option<TrainRecord>> = Vec::with_capacity(seeds.len());
    for _ in &seeds {
        records.push(None);
    }

    for chunk in seeds.chunks(jobs) {
        let outcomes: Vec<(usize, Result<TrainRecord, AgentError>)> =
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for seed in chunk {
                    let seed = *seed;
                    let index = seeds.iter().position(|s| *s == seed).expect("seed in list");
                    let cfg = config;
                    handles.push((index, scope.spawn(move || agents::train(cfg, seed))));
                }
                handles
                    .into_iter()
                    .map(|(index, handle)| {
                        (index, handle.join().unwrap_or(Err(AgentError::InvalidConfig(
                            "seed job panicked".into(),
                        ))))
                    })
                    .collect()
            });
        for (index, outcome) in outcomes {
            records[index] = Some(outcome?);
        }
    }

    let mut seed_curves = Vec::new();
    let mut seed_diagnostics = Vec::new();
    let mut checkpoints = Vec::new();
    let mut final_means = Vec::new();
    let mut final_stds = Vec::new();
    for record in records.iter().map(|r| r.as_ref().expect("all jobs finished")) {
        let seed = record.seed;
        let curve_path = out_dir.join(format!("seed_{seed}_curve.csv"));
        csvio::write_atomic(&curve_path, &csvio::seed_curve_csv(seed, &record.points))?;
        seed_curves.push(curve_path);

        let diag_path = out_dir.join(format!("seed_{seed}_diag.csv"));
        csvio::write_atomic(&diag_path, &csvio::diagnostics_csv(&record.diagnostics))?;
        seed_diagnostics.push(diag_path);

        let ckpt_path = out_dir.join(format!("seed_{seed}.ckpt"));
        let ckpt = checkpoint::agent_checkpoint(&record.agent.policy, &record.agent.value_net);
        checkpoint::write_checkpoint(&ckpt_path, &ckpt)?;
        checkpoints.push(ckpt_path);

        let last = record.points.last();
        final_means.push(last.map(|p| p.mean_return).unwrap_or(f64::NAN));
        final_stds.push(last.map(|p| p.std_return).unwrap_or(f64::NAN));

        if config.debug.value_snapshots {
            if let Some(snapshot) = value_snapshot(config, record) {
                let snap_path = out_dir.join(format!("seed_{seed}_value_snapshot.csv"));
                csvio::write_atomic(&snap_path, &snapshot)?;
            }
        }
        if config.debug.advantage_dump {
            let dump_path = out_dir.join(format!("seed_{seed}_advantages.csv"));
            csvio::write_atomic(&dump_path, &advantage_dump(config, record)?)?;
        }
    }

    let aggregate_rows = csvio::aggregate_from_seed_files(&seed_curves)?;
    let aggregate = out_dir.join("aggregate.csv");
    csvio::write_atomic(&aggregate, &csvio::aggregate_csv(&aggregate_rows))?;

    Ok(TrainArtifacts {
        seed_curves,
        seed_diagnostics,
        checkpoints,
        aggregate,
        final_means,
        final_stds,
    })
}

/// Debug artifact: advantages of one fresh rollout under the final policy.
fn advantage_dump(config: &ExperimentConfig, record: &TrainRecord) -> Result<String, HarnessError> {
    let seed = record.seed;
    let mut env = config.make_env(seed ^ 0x5eed);
    let mut state = env.reset();
    let mut rng = derive(seed, stream::EVAL);
    let buffer = record.agent.collect_rollout(
        env.as_mut(),
        &mut state,
        config.agent.rollout_length.min(256),
        &mut rng,
    )?;
    let scalar = !config.agent.algorithm.is_distributional();
    Ok(csvio::advantage_dump_csv(&buffer, &config.agent.gae, scalar))
}

/// Debug artifact: predicted value distributions at a few reference states.
fn value_snapshot(config: &ExperimentConfig, record: &TrainRecord) -> Option<String> {
    let mut env = config.make_env(record.seed ^ 0x5eed);
    let mut dists = Vec::new();
    let state = env.reset();
    dists.push(record.agent.value_net.predict(&state).ok()?);
    for _ in 0..3 {
        let sr = env.step(&vec![0.5; env.spec().action_dim]);
        dists.push(record.agent.value_net.predict(&sr.next_state).ok()?);
        if sr.done || sr.truncated {
            break;
        }
    }
    Some(csvio::value_snapshot_csv(&dists))
}

/// Sweep over a gamma/lambda grid: one `run_train` per cell in its own
/// subdirectory plus a summary CSV `gamma,lambda,final_mean_return`.
pub fn run_sweep(
    base: &ExperimentConfig,
    gammas: &[f64],
    lambdas: &[f64],
    out_dir: &Path,
    jobs: usize,
) -> Result<PathBuf, HarnessError> {
    ensure_dir(out_dir)?;
    let mut summary = String::from("gamma,lambda,final_mean_return\n");
    for &gamma in gammas {
        for &lambda in lambdas {
            let mut cfg = base.clone();
            cfg.agent.gae.gamma = gamma;
            cfg.agent.gae.lambda = lambda;
            cfg.agent
                .validate()
                .map_err(HarnessError::Agent)?;
            let cell_dir = out_dir.join(format!("sweep_g{gamma}_l{lambda}"));
            let artifacts = run_train(&cfg, &cell_dir, jobs)?;
            let n = artifacts.final_means.len() as f64;
            let final_mean = artifacts.final_means.iter().sum::<f64>() / n;
            summary.push_str(&format!("{gamma},{lambda},{final_mean}\n"));
        }
    }
    let summary_path = out_dir.join("sweep_summary.csv");
    csvio::write_atomic(&summary_path, &summary)?;
    Ok(summary_path)
}

/// Load a checkpoint and report the deterministic policy's mean return.
pub fn run_eval(
    config: &ExperimentConfig,
    checkpoint_path: &Path,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    let ckpt = checkpoint::read_checkpoint(checkpoint_path)?;
    let (policy, _) = checkpoint::agent_from_checkpoint(&ckpt)?;
    let mut env = config.make_env(seed);
    Ok(agents::evaluate_policy(&policy, env.as_mut(), episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn tiny_config(seeds: &str) -> ExperimentConfig {
        ExperimentConfig::parse_str(&format!(
            "\
env.name = pointmass
env.noise_std = 0.0
agent.algorithm = dppo
agent.rollout_length = 64
agent.minibatch_size = 32
agent.ppo_epochs = 2
quantiles = 4
hidden = 8
total_timesteps = 128
eval_interval = 64
eval_episodes = 2
seeds = {seeds}
"
        ))
        .unwrap()
    }

    #[test]
    fn two_seeds_produce_two_curves_and_one_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config("1, 2");
        let artifacts = run_train(&cfg, dir.path(), 2).unwrap();
        assert_eq!(artifacts.seed_curves.len(), 2);
        assert_eq!(artifacts.checkpoints.len(), 2);
        assert!(artifacts.aggregate.exists());
        for p in &artifacts.seed_curves {
            assert!(p.exists());
        }
        // Aggregate mean equals the hand average of the per-seed columns.
        let c1 = csvio::read_seed_curve(&artifacts.seed_curves[0]).unwrap();
        let c2 = csvio::read_seed_curve(&artifacts.seed_curves[1]).unwrap();
        let agg = csvio::aggregate_from_seed_files(&artifacts.seed_curves).unwrap();
        for (i, row) in agg.iter().enumerate() {
            let hand = 0.5 * (c1[i].1.mean_return + c2[i].1.mean_return);
            assert!((row.mean_over_seeds - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn reruns_are_byte_identical_regardless_of_jobs() {
        let cfg = tiny_config("3, 4");
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_train(&cfg, dir_a.path(), 1).unwrap();
        let b = run_train(&cfg, dir_b.path(), 2).unwrap();
        for (pa, pb) in a
            .seed_curves
            .iter()
            .chain([&a.aggregate])
            .zip(b.seed_curves.iter().chain([&b.aggregate]))
        {
            let ba = std::fs::read(pa).unwrap();
            let bb = std::fs::read(pb).unwrap();
            assert_eq!(ba, bb, "{} vs {}", pa.display(), pb.display());
        }
    }

    #[test]
    fn eval_reproduces_the_final_checkpoint_return() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config("5");
        let artifacts = run_train(&cfg, dir.path(), 1).unwrap();
        let (mean, _) = run_eval(&cfg, &artifacts.checkpoints[0], 2, 999).unwrap();
        assert!(mean.is_finite());
    }

    #[test]
    fn sweep_grid_writes_cells_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config("6");
        let summary = run_sweep(&cfg, &[0.9, 0.99], &[0.8, 0.95], dir.path(), 1).unwrap();
        let text = std::fs::read_to_string(&summary).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "gamma,lambda,final_mean_return");
        assert_eq!(lines.len(), 5, "header plus one row per cell");
        for g in ["0.9", "0.99"] {
            for l in ["0.8", "0.95"] {
                assert!(dir.path().join(format!("sweep_g{g}_l{l}")).join("aggregate.csv").exists());
            }
        }
    }

    #[test]
    fn debug_artifacts_are_written_when_enabled() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config("7");
        cfg.debug.advantage_dump = true;
        cfg.debug.value_snapshots = true;
        run_train(&cfg, dir.path(), 1).unwrap();
        let dump = dir.path().join("seed_7_advantages.csv");
        assert!(dump.exists());
        let text = std::fs::read_to_string(dump).unwrap();
        assert!(text.starts_with("step,reward,delta,advantage\n"));
        assert!(dir.path().join("seed_7_value_snapshot.csv").exists());
    }
}

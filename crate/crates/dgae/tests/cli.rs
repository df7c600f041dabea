//! End-to-end checks of the compiled binary: exit codes, artifact layout,
//! and checkpoint evaluation through the real CLI surface.

use std::path::Path;
use std::process::Command;

fn dgae_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgae"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.conf");
    std::fs::write(&path, body).unwrap();
    path
}

const TINY: &str = "\
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
seeds = 1,2
";

#[test]
fn train_writes_expected_artifacts_and_eval_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let status = dgae_bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--jobs", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "seed_1_curve.csv",
        "seed_2_curve.csv",
        "seed_1_diag.csv",
        "seed_2_diag.csv",
        "seed_1.ckpt",
        "seed_2.ckpt",
        "aggregate.csv",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }

    let output = dgae_bin()
        .args(["eval", "--config"])
        .arg(&config)
        .arg("--checkpoint")
        .arg(out.join("seed_1.ckpt"))
        .args(["--episodes", "2", "--seed", "3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("mean return"), "unexpected eval output: {text}");
}

#[test]
fn seed_override_flag_replaces_the_configured_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let status = dgae_bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seeds", "9"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("seed_9_curve.csv").exists());
    assert!(!out.join("seed_1_curve.csv").exists());
}

#[test]
fn config_errors_exit_nonzero_with_a_named_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "env.name = pointmass\ntotal_timesteps = soon\nseeds = 1\n",
    );
    let output = dgae_bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("total_timesteps"), "stderr: {err}");
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn sweep_produces_the_grid_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("sweep");
    let output = dgae_bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--gamma-grid", "0.9,0.99", "--lambda-grid", "0.8"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "header plus two cells: {summary}");
    assert!(summary.starts_with("gamma,lambda,final_mean_return\n"));
}

#[test]
fn verify_subcommand_passes_and_prints_a_table() {
    let output = dgae_bin().arg("verify").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    for name in [
        "theorem1-equivalence",
        "scalar-gae-reduction",
        "metric-algebra",
        "gamma-contraction",
        "gradient-checks",
        "chain-policy-evaluation",
    ] {
        assert!(text.contains(name), "missing check {name} in:\n{text}");
    }
    assert_eq!(text.matches("PASS").count(), 6, "table:\n{text}");
}

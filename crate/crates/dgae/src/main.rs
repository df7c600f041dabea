//! Command-line entry point: train, verify, sweep, eval.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dgae::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dgae", version, about = "Distributional generalized advantage estimation: training, verification, and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config's seeds).
    #[arg(long)]
    seeds: Option<String>,
    /// Number of seed jobs to run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write curves, diagnostics,
    /// checkpoints and the cross-seed aggregate.
    Train(RunArgs),
    /// Run the oracle and property check suite; nonzero exit on failure.
    Verify,
    /// Train over a gamma/lambda grid and summarize final returns.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated gamma grid.
        #[arg(long = "gamma-grid")]
        gamma_grid: String,
        /// Comma-separated lambda grid.
        #[arg(long = "lambda-grid")]
        lambda_grid: String,
    },
    /// Load a checkpoint and report the deterministic policy's return.
    Eval {
        /// Experiment configuration file (for the environment settings).
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint file written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Environment seed for the evaluation episodes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), String> {
    let mut config = ExperimentConfig::parse_file(&args.config).map_err(|e| e.to_string())?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds
            .split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed {s:?}")))
            .collect::<Result<_, _>>()?;
        config.validate().map_err(|e| e.to_string())?;
    }
    let out = args.out.clone().unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad {what} value {s:?}")))
        .collect()
}

fn run() -> Result<(), String> {
    match Cli::parse().command {
        Command::Train(args) => {
            let (config, out) = load_config(&args)?;
            let artifacts = harness::run_train(&config, &out, args.jobs).map_err(|e| e.to_string())?;
            println!("wrote {} seed curves and {}", artifacts.seed_curves.len(), artifacts.aggregate.display());
            for (seed, mean) in config.seeds.iter().zip(&artifacts.final_means) {
                println!("seed {seed}: final mean return {mean}");
            }
            Ok(())
        }
        Command::Verify => {
            let results = harness::run_all_checks();
            let name_width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let mut all_passed = true;
            for r in &results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!("{status}  {:<name_width$}  {:>8.2}s  {}", r.name, r.seconds, r.detail);
                all_passed &= r.passed;
            }
            let total: f64 = results.iter().map(|r| r.seconds).sum();
            println!("total {total:.2}s");
            if all_passed {
                Ok(())
            } else {
                Err("verification failed".into())
            }
        }
        Command::Sweep { run: args, gamma_grid, lambda_grid } => {
            let (config, out) = load_config(&args)?;
            let gammas = parse_grid(&gamma_grid, "gamma")?;
            let lambdas = parse_grid(&lambda_grid, "lambda")?;
            let summary = harness::run_sweep(&config, &gammas, &lambdas, &out, args.jobs)
                .map_err(|e| e.to_string())?;
            println!("wrote {}", summary.display());
            print!("{}", std::fs::read_to_string(&summary).map_err(|e| e.to_string())?);
            Ok(())
        }
        Command::Eval { config, checkpoint, episodes, seed } => {
            let config = ExperimentConfig::parse_file(&config).map_err(|e| e.to_string())?;
            let (mean, std) =
                harness::run_eval(&config, &checkpoint, episodes, seed).map_err(|e| e.to_string())?;
            println!("mean return {mean} (std {std}) over {episodes} episodes");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

//! Experiment harness: configuration files, multi-seed orchestration, CSV
//! artifacts, and the verification check suite.

pub mod config;
pub mod csvio;
pub mod runner;
pub mod verify;

pub use config::{ConfigError, DebugConfig, EnvConfig, ExperimentConfig};
pub use runner::{run_eval, run_sweep, run_train, HarnessError, TrainArtifacts};
pub use verify::{run_all_checks, CheckResult};

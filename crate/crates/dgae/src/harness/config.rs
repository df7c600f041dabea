//! Experiment configuration: a line-oriented `key = value` format with
//! dotted section prefixes, parsed without any external dependency so the
//! files stay diff-friendly and the errors can name the exact line.
//!
//! ```text
//! # training run
//! env.name = pointmass
//! env.noise_std = 0.05
//! agent.algorithm = dppo
//! agent.gamma = 0.99
//! total_timesteps = 200000
//! seeds = 1,2,3,4,5
//! ```
//!
//! Unknown keys are errors; every omitted key falls back to the documented
//! default. `serialize` emits the full canonical key set, so a parse ->
//! serialize -> parse round trip is the identity on configurations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::advantage::GaeParams;
use crate::agents::{AgentConfig, Algorithm};
use crate::envs::chain::{ChainConfig, ChainMdp, RewardLaw};
use crate::envs::pointmass::PointMass;
use crate::envs::Environment;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("io error reading config: {0}")]
    Io(String),
    #[error("config line {line}: field {field}: {message}")]
    Field { line: usize, field: String, message: String },
    #[error("config line {line}: expected key = value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Environment selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Pointmass {
        noise_std: f64,
    },
    /// Slippery chain with a constant per-step law and a two-atom goal law.
    Chain {
        num_states: usize,
        slip_prob: f64,
        step_reward: f64,
        goal_lo: f64,
        goal_hi: f64,
        goal_p_hi: f64,
        max_episode_steps: usize,
    },
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Pointmass { .. } => "pointmass",
            EnvConfig::Chain { .. } => "chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DebugConfig {
    /// Dump per-rollout advantage CSVs next to the curves.
    pub advantage_dump: bool,
    /// Dump the value-distribution snapshot at each evaluation point.
    pub value_snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub quantiles: usize,
    pub hidden: usize,
    pub total_timesteps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub debug: DebugConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.agent.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(ConfigError::Invalid("seeds must be distinct".into()));
        }
        if self.total_timesteps < self.agent.rollout_length as u64 {
            return Err(ConfigError::Invalid(format!(
                "total_timesteps ({}) must cover at least one rollout ({})",
                self.total_timesteps, self.agent.rollout_length
            )));
        }
        if self.quantiles == 0 || self.hidden == 0 || self.eval_episodes == 0 {
            return Err(ConfigError::Invalid(
                "quantiles, hidden and eval_episodes must be positive".into(),
            ));
        }
        if self.eval_interval == 0 {
            return Err(ConfigError::Invalid("eval_interval must be positive".into()));
        }
        if let EnvConfig::Chain { num_states, slip_prob, goal_lo, goal_hi, goal_p_hi, max_episode_steps, .. } = &self.env {
            if *num_states < 2 || !(0.0..=0.5).contains(slip_prob) || goal_lo > goal_hi
                || !(0.0..=1.0).contains(goal_p_hi) || *max_episode_steps == 0
            {
                return Err(ConfigError::Invalid("invalid chain environment parameters".into()));
            }
        }
        Ok(())
    }

    /// Instantiate the configured environment with its own noise stream.
    pub fn make_env(&self, seed: u64) -> Box<dyn Environment> {
        match &self.env {
            EnvConfig::Pointmass { noise_std } => Box::new(PointMass::new(*noise_std, seed)),
            EnvConfig::Chain {
                num_states,
                slip_prob,
                step_reward,
                goal_lo,
                goal_hi,
                goal_p_hi,
                max_episode_steps,
            } => {
                let cfg = ChainConfig::uniform(
                    *num_states,
                    *slip_prob,
                    RewardLaw::Constant(*step_reward),
                    RewardLaw::Constant(*step_reward),
                    RewardLaw::TwoAtom { lo: *goal_lo, hi: *goal_hi, p_hi: *goal_p_hi },
                    *max_episode_steps,
                )
                .expect("validated chain configuration");
                Box::new(ChainMdp::new(cfg, seed).expect("validated chain configuration"))
            }
        }
    }

    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: lineno, text: line.to_string() });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line: lineno, key });
            }
            entries.insert(key, (value, lineno));
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut entries: BTreeMap<String, (String, usize)>) -> Result<Self, ConfigError> {
        fn take(entries: &mut BTreeMap<String, (String, usize)>, key: &str) -> Option<(String, usize)> {
            entries.remove(key)
        }
        fn parse_as<T: std::str::FromStr>(
            key: &str,
            raw: (String, usize),
        ) -> Result<T, ConfigError> {
            raw.0.parse().map_err(|_| ConfigError::Field {
                line: raw.1,
                field: key.to_string(),
                message: format!("cannot parse {:?}", raw.0),
            })
        }
        fn opt<T: std::str::FromStr>(
            entries: &mut BTreeMap<String, (String, usize)>,
            key: &str,
            default: T,
        ) -> Result<T, ConfigError> {
            match take(entries, key) {
                None => Ok(default),
                Some(raw) => parse_as(key, raw),
            }
        }
        fn opt_bool(
            entries: &mut BTreeMap<String, (String, usize)>,
            key: &str,
            default: bool,
        ) -> Result<bool, ConfigError> {
            match take(entries, key) {
                None => Ok(default),
                Some((v, line)) => match v.as_str() {
                    "true" | "1" | "yes" | "on" => Ok(true),
                    "false" | "0" | "no" | "off" => Ok(false),
                    _ => Err(ConfigError::Field {
                        line,
                        field: key.to_string(),
                        message: format!("expected a boolean, got {v:?}"),
                    }),
                },
            }
        }

        let (env_name, env_line) = take(&mut entries, "env.name")
            .ok_or_else(|| ConfigError::Missing("env.name".into()))?;
        let env = match env_name.as_str() {
            "pointmass" => EnvConfig::Pointmass {
                noise_std: opt(&mut entries, "env.noise_std", 0.0)?,
            },
            "chain" => EnvConfig::Chain {
                num_states: opt(&mut entries, "env.num_states", 5)?,
                slip_prob: opt(&mut entries, "env.slip_prob", 0.1)?,
                step_reward: opt(&mut entries, "env.step_reward", -0.05)?,
                goal_lo: opt(&mut entries, "env.goal_lo", -1.0)?,
                goal_hi: opt(&mut entries, "env.goal_hi", 1.0)?,
                goal_p_hi: opt(&mut entries, "env.goal_p_hi", 0.6)?,
                max_episode_steps: opt(&mut entries, "env.max_episode_steps", 200)?,
            },
            other => {
                return Err(ConfigError::Field {
                    line: env_line,
                    field: "env.name".into(),
                    message: format!("unknown environment {other:?}"),
                })
            }
        };

        let algorithm = match take(&mut entries, "agent.algorithm") {
            None => Algorithm::Dppo,
            Some((v, line)) => Algorithm::parse(&v).ok_or(ConfigError::Field {
                line,
                field: "agent.algorithm".into(),
                message: format!("unknown algorithm {v:?}"),
            })?,
        };
        let defaults = AgentConfig::defaults(algorithm);
        let agent = AgentConfig {
            algorithm,
            gae: GaeParams {
                gamma: opt(&mut entries, "agent.gamma", defaults.gae.gamma)?,
                lambda: opt(&mut entries, "agent.lambda", defaults.gae.lambda)?,
            },
            rollout_length: opt(&mut entries, "agent.rollout_length", defaults.rollout_length)?,
            ppo_clip: opt(&mut entries, "agent.ppo_clip", defaults.ppo_clip)?,
            ppo_epochs: opt(&mut entries, "agent.ppo_epochs", defaults.ppo_epochs)?,
            minibatch_size: opt(&mut entries, "agent.minibatch_size", defaults.minibatch_size)?,
            entropy_coef: opt(&mut entries, "agent.entropy_coef", defaults.entropy_coef)?,
            value_lr: opt(&mut entries, "agent.value_lr", defaults.value_lr)?,
            policy_lr: opt(&mut entries, "agent.policy_lr", defaults.policy_lr)?,
            normalize_advantages: opt_bool(
                &mut entries,
                "agent.normalize_advantages",
                defaults.normalize_advantages,
            )?,
            kappa: opt(&mut entries, "agent.kappa", defaults.kappa)?,
            state_dependent_std: opt_bool(
                &mut entries,
                "agent.state_dependent_std",
                defaults.state_dependent_std,
            )?,
        };

        let quantiles = opt(&mut entries, "quantiles", 64)?;
        let hidden = opt(&mut entries, "hidden", 64)?;
        let total_timesteps = match take(&mut entries, "total_timesteps") {
            None => return Err(ConfigError::Missing("total_timesteps".into())),
            Some(raw) => parse_as("total_timesteps", raw)?,
        };
        let eval_interval = opt(&mut entries, "eval_interval", 10 * agent.rollout_length as u64)?;
        let eval_episodes = opt(&mut entries, "eval_episodes", 10)?;

        let seeds = match take(&mut entries, "seeds") {
            None => return Err(ConfigError::Missing("seeds".into())),
            Some((v, line)) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<u64>().map_err(|_| ConfigError::Field {
                        line,
                        field: "seeds".into(),
                        message: format!("cannot parse seed {:?}", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let output_dir = PathBuf::from(
            take(&mut entries, "output_dir").map(|(v, _)| v).unwrap_or_else(|| "runs".into()),
        );
        let debug = DebugConfig {
            advantage_dump: opt_bool(&mut entries, "debug.advantage_dump", false)?,
            value_snapshots: opt_bool(&mut entries, "debug.value_snapshots", false)?,
        };

        if let Some((key, (_, line))) = entries.into_iter().next() {
            return Err(ConfigError::UnknownKey { line, key });
        }

        let cfg = Self {
            env,
            agent,
            quantiles,
            hidden,
            total_timesteps,
            eval_interval,
            eval_episodes,
            seeds,
            output_dir,
            debug,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; parsing it reproduces `self` exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        match &self.env {
            EnvConfig::Pointmass { noise_std } => {
                out.push_str("env.name = pointmass\n");
                out.push_str(&format!("env.noise_std = {noise_std}\n"));
            }
            EnvConfig::Chain {
                num_states,
                slip_prob,
                step_reward,
                goal_lo,
                goal_hi,
                goal_p_hi,
                max_episode_steps,
            } => {
                out.push_str("env.name = chain\n");
                out.push_str(&format!("env.num_states = {num_states}\n"));
                out.push_str(&format!("env.slip_prob = {slip_prob}\n"));
                out.push_str(&format!("env.step_reward = {step_reward}\n"));
                out.push_str(&format!("env.goal_lo = {goal_lo}\n"));
                out.push_str(&format!("env.goal_hi = {goal_hi}\n"));
                out.push_str(&format!("env.goal_p_hi = {goal_p_hi}\n"));
                out.push_str(&format!("env.max_episode_steps = {max_episode_steps}\n"));
            }
        }
        let a = &self.agent;
        out.push_str(&format!("agent.algorithm = {}\n", a.algorithm));
        out.push_str(&format!("agent.gamma = {}\n", a.gae.gamma));
        out.push_str(&format!("agent.lambda = {}\n", a.gae.lambda));
        out.push_str(&format!("agent.rollout_length = {}\n", a.rollout_length));
        out.push_str(&format!("agent.ppo_clip = {}\n", a.ppo_clip));
        out.push_str(&format!("agent.ppo_epochs = {}\n", a.ppo_epochs));
        out.push_str(&format!("agent.minibatch_size = {}\n", a.minibatch_size));
        out.push_str(&format!("agent.entropy_coef = {}\n", a.entropy_coef));
        out.push_str(&format!("agent.value_lr = {}\n", a.value_lr));
        out.push_str(&format!("agent.policy_lr = {}\n", a.policy_lr));
        out.push_str(&format!("agent.normalize_advantages = {}\n", a.normalize_advantages));
        out.push_str(&format!("agent.kappa = {}\n", a.kappa));
        out.push_str(&format!("agent.state_dependent_std = {}\n", a.state_dependent_std));
        out.push_str(&format!("quantiles = {}\n", self.quantiles));
        out.push_str(&format!("hidden = {}\n", self.hidden));
        out.push_str(&format!("total_timesteps = {}\n", self.total_timesteps));
        out.push_str(&format!("eval_interval = {}\n", self.eval_interval));
        out.push_str(&format!("eval_episodes = {}\n", self.eval_episodes));
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("seeds = {}\n", seeds.join(",")));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        out.push_str(&format!("debug.advantage_dump = {}\n", self.debug.advantage_dump));
        out.push_str(&format!("debug.value_snapshots = {}\n", self.debug.value_snapshots));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample experiment
env.name = pointmass
env.noise_std = 0.05
agent.algorithm = dppo
agent.gamma = 0.99
agent.lambda = 0.95
agent.rollout_length = 256
total_timesteps = 1024
eval_interval = 512
seeds = 1, 2, 3
output_dir = out/test
";

    #[test]
    fn parses_with_defaults_and_round_trips() {
        let cfg = ExperimentConfig::parse_str(SAMPLE).unwrap();
        assert_eq!(cfg.env, EnvConfig::Pointmass { noise_std: 0.05 });
        assert_eq!(cfg.agent.algorithm, Algorithm::Dppo);
        assert_eq!(cfg.agent.rollout_length, 256);
        assert_eq!(cfg.quantiles, 64);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert!(cfg.agent.normalize_advantages);

        let text = cfg.serialize();
        let reparsed = ExperimentConfig::parse_str(&text).unwrap();
        assert_eq!(cfg, reparsed);
        // Serialization is canonical: a second round trip is byte-stable.
        assert_eq!(text, reparsed.serialize());
    }

    #[test]
    fn errors_name_the_field_and_line() {
        let bad = "env.name = pointmass\ntotal_timesteps = many\nseeds = 1\n";
        match ExperimentConfig::parse_str(bad) {
            Err(ConfigError::Field { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "total_timesteps");
            }
            other => panic!("expected field error, got {other:?}"),
        }

        let unknown = "env.name = pointmass\ntotal_timesteps = 2048\nseeds = 1\nagent.warmup = 3\n";
        match ExperimentConfig::parse_str(unknown) {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 4);
                assert_eq!(key, "agent.warmup");
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }

        let dup = "env.name = pointmass\nenv.name = chain\ntotal_timesteps = 2048\nseeds = 1\n";
        assert!(matches!(
            ExperimentConfig::parse_str(dup),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));

        let syntax = "env.name = pointmass\njust words\n";
        assert!(matches!(
            ExperimentConfig::parse_str(syntax),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn validation_rules() {
        let dup_seeds = SAMPLE.replace("seeds = 1, 2, 3", "seeds = 1, 1");
        assert!(matches!(
            ExperimentConfig::parse_str(&dup_seeds),
            Err(ConfigError::Invalid(_))
        ));

        let short = SAMPLE.replace("total_timesteps = 1024", "total_timesteps = 100");
        assert!(matches!(
            ExperimentConfig::parse_str(&short),
            Err(ConfigError::Invalid(_))
        ));

        let missing = "env.name = pointmass\nseeds = 1\n";
        assert_eq!(
            ExperimentConfig::parse_str(missing),
            Err(ConfigError::Missing("total_timesteps".into()))
        );
    }

    #[test]
    fn chain_env_round_trip() {
        let text = "\
env.name = chain
env.num_states = 4
env.slip_prob = 0.2
agent.algorithm = da2c
agent.rollout_length = 32
total_timesteps = 64
seeds = 7
";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(cfg.env.name(), "chain");
        assert!(!cfg.agent.normalize_advantages);
        let reparsed = ExperimentConfig::parse_str(&cfg.serialize()).unwrap();
        assert_eq!(cfg, reparsed);
        let mut env = cfg.make_env(3);
        let s = env.reset();
        assert_eq!(s.len(), 4);
    }
}

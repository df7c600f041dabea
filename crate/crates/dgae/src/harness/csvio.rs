//! CSV artifact writers and readers.
//!
//! All files carry a header row, use `.` as the decimal point and no locale
//! formatting, and are written atomically (temp file in the same directory,
//! then rename) so interrupted runs never leave truncated artifacts.
//! Floats are printed with Rust's shortest round-trip formatting, which
//! makes byte-identical reruns equivalent to numerically identical runs.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::advantage::{dgae, scalar_gae, GaeParams, RolloutBuffer};
use crate::agents::{EvalPoint, UpdateDiagnostics};
use crate::quantdist::QuantileDistribution;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

fn io_err(path: &Path, source: io::Error) -> CsvError {
    CsvError::Io { path: path.display().to_string(), source }
}

/// Write `contents` to `path` via a temp file and rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CsvError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(contents.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Per-seed learning curve: `seed,timesteps,mean_return,std_return`.
pub fn seed_curve_csv(seed: u64, points: &[EvalPoint]) -> String {
    let mut out = String::from("seed,timesteps,mean_return,std_return\n");
    for p in points {
        out.push_str(&format!("{seed},{},{},{}\n", p.timesteps, p.mean_return, p.std_return));
    }
    out
}

pub fn read_seed_curve(path: &Path) -> Result<Vec<(u64, EvalPoint)>, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "seed,timesteps,mean_return,std_return" {
                return Err(CsvError::Malformed {
                    path: path.display().to_string(),
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CsvError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, CsvError> {
            s.parse().map_err(|_| CsvError::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("bad {what} {s:?}"),
            })
        };
        let seed: u64 = fields[0].parse().map_err(|_| CsvError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("bad seed {:?}", fields[0]),
        })?;
        let timesteps: u64 = fields[1].parse().map_err(|_| CsvError::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("bad timesteps {:?}", fields[1]),
        })?;
        rows.push((
            seed,
            EvalPoint {
                timesteps,
                mean_return: parse(fields[2], "mean_return")?,
                std_return: parse(fields[3], "std_return")?,
            },
        ));
    }
    Ok(rows)
}

/// One aggregate row across seeds at a fixed timestep mark.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub timesteps: u64,
    pub mean_over_seeds: f64,
    pub std_over_seeds: f64,
}

/// Aggregate statistics recomputed purely from per-seed curve files. The
/// seed runs share an evaluation schedule, so rows align by position.
pub fn aggregate_from_seed_files(paths: &[std::path::PathBuf]) -> Result<Vec<AggregateRow>, CsvError> {
    let mut per_seed: Vec<Vec<(u64, EvalPoint)>> = Vec::new();
    for p in paths {
        per_seed.push(read_seed_curve(p)?);
    }
    let Some(first) = per_seed.first() else {
        return Ok(Vec::new());
    };
    let rows = first.len();
    for (p, curve) in paths.iter().zip(&per_seed) {
        if curve.len() != rows {
            return Err(CsvError::Malformed {
                path: p.display().to_string(),
                line: 0,
                message: format!("curve length {} does not match {}", curve.len(), rows),
            });
        }
    }
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let timesteps = first[i].1.timesteps;
        let values: Vec<f64> = per_seed
            .iter()
            .map(|curve| {
                debug_assert_eq!(curve[i].1.timesteps, timesteps, "misaligned eval schedule");
                curve[i].1.mean_return
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        out.push(AggregateRow { timesteps, mean_over_seeds: mean, std_over_seeds: var.sqrt() });
    }
    Ok(out)
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("timesteps,mean_over_seeds,std_over_seeds\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.timesteps, r.mean_over_seeds, r.std_over_seeds));
    }
    out
}

/// Diagnostics stream: one row per update.
pub fn diagnostics_csv(diags: &[UpdateDiagnostics]) -> String {
    let mut out = String::from("iter,timesteps,policy_loss,value_loss,mean_advantage,mean_return_eval\n");
    for d in diags {
        let eval = d.mean_return_eval.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.iter, d.timesteps, d.policy_loss, d.value_loss, d.mean_advantage, eval
        ));
    }
    out
}

/// Debug dump of a rollout: `step,reward,delta,advantage`. The delta column
/// is the one-step estimate (the advantage at lambda -> 0).
pub fn advantage_dump_csv(buffer: &RolloutBuffer, params: &GaeParams, scalar: bool) -> String {
    let advantages = if scalar {
        scalar_gae(buffer, params).expect("validated buffer")
    } else {
        dgae(buffer, params).expect("validated buffer")
    };
    let deltas = {
        let zero_lambda = GaeParams { gamma: params.gamma, lambda: 0.0 };
        if scalar {
            scalar_gae(buffer, &zero_lambda).expect("validated buffer")
        } else {
            dgae(buffer, &zero_lambda).expect("validated buffer")
        }
    };
    let mut out = String::from("step,reward,delta,advantage\n");
    for (t, tr) in buffer.transitions.iter().enumerate() {
        out.push_str(&format!("{t},{},{},{}\n", tr.reward, deltas[t], advantages[t]));
    }
    out
}

/// Value-distribution snapshot: one comma-separated quantile line per state.
pub fn value_snapshot_csv(dists: &[QuantileDistribution]) -> String {
    let mut out = String::new();
    for d in dists {
        out.push_str(&d.to_csv_line());
        out.push('\n');
    }
    out
}

//! Plain-text checkpoint format for policy and value networks.
//!
//! Layout (stable across versions):
//!
//! ```text
//! dgae-checkpoint v1
//! array <name> <dim0> <dim1> ...
//! <one parameter per line, shortest round-trip decimal>
//! ...
//! end
//! ```
//!
//! The dimensions on the `array` line are the element counts of the flat
//! value block that follows. Arrays written for an agent checkpoint:
//!
//! - `policy.shape 3`: `[input, hidden, output]` of the mean network
//! - `policy.mean_net <param_count>`: flat parameter block
//! - `policy.log_std <len>` (length 0 in state-dependent mode)
//! - `policy.meta 2`: `[state_dependent_std as 0/1, action_dim]`
//! - `value.shape 3` and `value.mlp <param_count>`: the value network
//!
//! Values use Rust's shortest round-trip float formatting, so a load
//! reproduces the saved parameters bit-exactly.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::mlp::{Mlp, MlpShape};
use super::policy::GaussianPolicy;
use super::QuantileValueNet;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint is missing array {0}")]
    MissingArray(String),
    #[error("array {name} has inconsistent shape")]
    BadShape { name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Checkpoint {
    arrays: BTreeMap<String, Array>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, dims: Vec<usize>, values: Vec<f64>) {
        self.arrays.insert(name.to_string(), Array { dims, values });
    }

    pub fn get(&self, name: &str) -> Result<&Array, CheckpointError> {
        self.arrays
            .get(name)
            .ok_or_else(|| CheckpointError::MissingArray(name.to_string()))
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("dgae-checkpoint v1\n");
        for (name, arr) in &self.arrays {
            out.push_str("array ");
            out.push_str(name);
            for d in &arr.dims {
                out.push(' ');
                out.push_str(&d.to_string());
            }
            out.push('\n');
            for v in &arr.values {
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(CheckpointError::Parse { line: 1, message: "empty file".into() })?;
        if header.trim() != "dgae-checkpoint v1" {
            return Err(CheckpointError::Parse {
                line: 1,
                message: format!("unknown header {header:?}"),
            });
        }
        let mut ckpt = Self::new();
        let mut current: Option<(String, Vec<usize>, usize, Vec<f64>)> = None;
        for (idx, raw) in lines {
            let line = raw.trim();
            let lineno = idx + 1;
            if line == "end" {
                if let Some((name, dims, expect, values)) = current.take() {
                    if values.len() != expect {
                        return Err(CheckpointError::BadShape { name });
                    }
                    ckpt.arrays.insert(name, Array { dims, values });
                }
                return Ok(ckpt);
            }
            if let Some(rest) = line.strip_prefix("array ") {
                if let Some((name, dims, expect, values)) = current.take() {
                    if values.len() != expect {
                        return Err(CheckpointError::BadShape { name });
                    }
                    ckpt.arrays.insert(name, Array { dims, values });
                }
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or(CheckpointError::Parse { line: lineno, message: "array needs a name".into() })?
                    .to_string();
                let dims: Vec<usize> = parts
                    .map(|p| {
                        p.parse().map_err(|_| CheckpointError::Parse {
                            line: lineno,
                            message: format!("bad dimension {p:?}"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let expect = dims.iter().product::<usize>();
                current = Some((name, dims, expect, Vec::with_capacity(expect)));
            } else if !line.is_empty() {
                let (_, _, _, values) = current.as_mut().ok_or(CheckpointError::Parse {
                    line: lineno,
                    message: "value outside any array".into(),
                })?;
                let v: f64 = line.parse().map_err(|_| CheckpointError::Parse {
                    line: lineno,
                    message: format!("bad value {line:?}"),
                })?;
                values.push(v);
            }
        }
        Err(CheckpointError::Parse { line: 0, message: "missing end marker".into() })
    }
}

fn insert_shape(ckpt: &mut Checkpoint, name: &str, shape: MlpShape) {
    ckpt.insert(
        name,
        vec![3],
        vec![shape.input as f64, shape.hidden as f64, shape.output as f64],
    );
}

fn read_shape(ckpt: &Checkpoint, name: &str) -> Result<MlpShape, CheckpointError> {
    let arr = ckpt.get(name)?;
    if arr.values.len() != 3 {
        return Err(CheckpointError::BadShape { name: name.into() });
    }
    Ok(MlpShape {
        input: arr.values[0] as usize,
        hidden: arr.values[1] as usize,
        output: arr.values[2] as usize,
    })
}

fn read_mlp(ckpt: &Checkpoint, shape_name: &str, params_name: &str) -> Result<Mlp, CheckpointError> {
    let shape = read_shape(ckpt, shape_name)?;
    let arr = ckpt.get(params_name)?;
    if arr.values.len() != shape.param_count() {
        return Err(CheckpointError::BadShape { name: params_name.into() });
    }
    let mut mlp = Mlp::zeros(shape);
    mlp.set_params(&arr.values);
    Ok(mlp)
}

/// Serialize a policy/value pair.
pub fn agent_checkpoint(policy: &GaussianPolicy, value: &QuantileValueNet) -> Checkpoint {
    let mut ckpt = Checkpoint::new();
    insert_shape(&mut ckpt, "policy.shape", policy.mean_net().shape());
    ckpt.insert(
        "policy.mean_net",
        vec![policy.mean_net().params().len()],
        policy.mean_net().params().to_vec(),
    );
    ckpt.insert("policy.log_std", vec![policy.log_std().len()], policy.log_std().to_vec());
    ckpt.insert(
        "policy.meta",
        vec![2],
        vec![policy.state_dependent_std() as u8 as f64, policy.action_dim() as f64],
    );
    insert_shape(&mut ckpt, "value.shape", value.mlp().shape());
    ckpt.insert(
        "value.mlp",
        vec![value.mlp().params().len()],
        value.mlp().params().to_vec(),
    );
    ckpt
}

/// Rebuild the policy/value pair from a parsed checkpoint.
pub fn agent_from_checkpoint(
    ckpt: &Checkpoint,
) -> Result<(GaussianPolicy, QuantileValueNet), CheckpointError> {
    let meta = ckpt.get("policy.meta")?;
    if meta.values.len() != 2 {
        return Err(CheckpointError::BadShape { name: "policy.meta".into() });
    }
    let state_dependent = meta.values[0] != 0.0;
    let action_dim = meta.values[1] as usize;

    let mean_net = read_mlp(ckpt, "policy.shape", "policy.mean_net")?;
    let ls = ckpt.get("policy.log_std")?;
    let policy = GaussianPolicy::from_parts(mean_net, ls.values.clone(), state_dependent, action_dim);

    let vnet = read_mlp(ckpt, "value.shape", "value.mlp")?;
    Ok((policy, QuantileValueNet::new(vnet)))
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(ckpt.serialize().as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    Checkpoint::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = crate::rng::derive(20, 0);
        let policy = GaussianPolicy::init(3, 2, 8, false, &mut rng);
        let value = QuantileValueNet::init(3, 16, 8, &mut rng);
        let ckpt = agent_checkpoint(&policy, &value);
        let text = ckpt.serialize();
        let parsed = Checkpoint::parse(&text).unwrap();
        let (p2, v2) = agent_from_checkpoint(&parsed).unwrap();
        assert_eq!(policy, p2);
        assert_eq!(value, v2);
    }

    #[test]
    fn state_dependent_round_trip() {
        let mut rng = crate::rng::derive(21, 0);
        let policy = GaussianPolicy::init(2, 2, 4, true, &mut rng);
        let value = QuantileValueNet::init(2, 4, 4, &mut rng);
        let ckpt = agent_checkpoint(&policy, &value);
        let (p2, _) = agent_from_checkpoint(&Checkpoint::parse(&ckpt.serialize()).unwrap()).unwrap();
        assert!(p2.state_dependent_std());
        assert_eq!(policy, p2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Checkpoint::parse("dgae-checkpoint v1\narray a 2\n1.0\nnot_a_number\nend\n");
        match err {
            Err(CheckpointError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            Checkpoint::parse("dgae-checkpoint v1\narray a 2\n1.0\n"),
            Err(CheckpointError::Parse { .. })
        ));
        assert!(matches!(
            Checkpoint::parse("wrong header\nend\n"),
            Err(CheckpointError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip_is_atomic_and_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        let mut rng = crate::rng::derive(22, 0);
        let policy = GaussianPolicy::init(2, 1, 6, false, &mut rng);
        let value = QuantileValueNet::init(2, 8, 6, &mut rng);
        let ckpt = agent_checkpoint(&policy, &value);
        write_checkpoint(&path, &ckpt).unwrap();
        // No temp litter left behind.
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        let loaded = read_checkpoint(&path).unwrap();
        let (p2, v2) = agent_from_checkpoint(&loaded).unwrap();
        assert_eq!(policy, p2);
        assert_eq!(value, v2);
    }
}

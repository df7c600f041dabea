//! Quantile-function representation of return distributions and the
//! transport metrics defined on them.
//!
//! A distribution is stored as its inverse CDF evaluated at the `N` midpoint
//! fractions `q_i = (2i+1)/(2N)`. Under this atomic representation the
//! integral over `q in [0,1]` of any per-quantile cost reduces to the
//! uniform average over the `N` fractions, which is exact for the
//! distributions the representation can express and makes every metric here
//! a closed-form sum.
//!
//! Two metrics are provided:
//!
//! - [`wasserstein_p`], the usual symmetric p-Wasserstein distance
//!   `((1/N) * sum_i |F_i - G_i|^p)^(1/p)`,
//! - [`directional_metric`], the signed quantity
//!   `(1/N) * sum_i (F_i - G_i)` obtained from a linear (identity) transport
//!   cost. Its sign encodes the direction of the net mass flow: negative
//!   means the second distribution dominates, positive the first. It is not
//!   a metric in the mathematical sense (it is antisymmetric and ignores
//!   higher moments); the name follows the quantity it is derived from.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("quantile vector must contain at least one value")]
    Empty,
    #[error("quantile value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("quantile values must be nondecreasing (violated at index {index})")]
    NotMonotonic { index: usize },
    #[error("quantile counts differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("scale factor must be strictly positive, got {eta}")]
    NonPositiveScale { eta: f64 },
    #[error("wasserstein order must satisfy p >= 1, got {p}")]
    OrderOutOfRange { p: f64 },
    #[error("unparsable quantile csv field at position {index}")]
    Csv { index: usize },
}

/// Inverse CDF of a return distribution sampled at midpoint fractions.
///
/// Invariants (enforced at construction): at least one value, all values
/// finite, values nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDistribution {
    values: Vec<f64>,
}

impl QuantileDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self, QuantError> {
        if values.is_empty() {
            return Err(QuantError::Empty);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(QuantError::NonFinite { index: i });
            }
            if i > 0 && v < values[i - 1] {
                return Err(QuantError::NotMonotonic { index: i });
            }
        }
        Ok(Self { values })
    }

    /// All `n` quantiles equal to `value`.
    pub fn constant(value: f64, n: usize) -> Result<Self, QuantError> {
        Self::new(vec![value; n])
    }

    /// The zero distribution (the bootstrap stand-in for terminal states).
    pub fn zeros(n: usize) -> Result<Self, QuantError> {
        Self::constant(0.0, n)
    }

    /// Build from an empirical sample by sorting ascending and reading the
    /// order statistics at the midpoint ranks `floor(q_i * m)`.
    pub fn from_samples(samples: &[f64], n: usize) -> Result<Self, QuantError> {
        if samples.is_empty() || n == 0 {
            return Err(QuantError::Empty);
        }
        let mut sorted = samples.to_vec();
        for (i, &v) in sorted.iter().enumerate() {
            if !v.is_finite() {
                return Err(QuantError::NonFinite { index: i });
            }
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = sorted.len();
        let values = (0..n)
            .map(|i| {
                let q = (2 * i + 1) as f64 / (2 * n) as f64;
                let idx = ((q * m as f64).floor() as usize).min(m - 1);
                sorted[idx]
            })
            .collect();
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Expected value: the uniform average of the quantiles.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Quantiles of the scaled random variable `eta * X`; valid for
    /// `eta > 0` (the inverse CDF of `eta X` is `eta` times the inverse CDF
    /// of `X`). Nonpositive factors would reorder the quantiles and are
    /// rejected.
    pub fn scale(&self, eta: f64) -> Result<Self, QuantError> {
        if eta <= 0.0 || !eta.is_finite() || eta.is_nan() {
            return Err(QuantError::NonPositiveScale { eta });
        }
        Ok(Self {
            values: self.values.iter().map(|v| eta * v).collect(),
        })
    }

    /// Quantiles of `X + c`.
    pub fn shift(&self, c: f64) -> Self {
        assert!(c.is_finite(), "shift constant must be finite, got {c}");
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// One comma-separated line of the `N` quantile values, the format used
    /// by the harness for value-distribution snapshots.
    pub fn to_csv_line(&self) -> String {
        let fields: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        fields.join(",")
    }

    pub fn from_csv_line(line: &str) -> Result<Self, QuantError> {
        let mut values = Vec::new();
        for (i, field) in line.trim().split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| QuantError::Csv { index: i })?;
            values.push(v);
        }
        Self::new(values)
    }
}

/// The midpoint quantile fractions `q_i = (2i+1)/(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFractions {
    fractions: Vec<f64>,
}

impl QuantileFractions {
    pub fn midpoints(n: usize) -> Self {
        assert!(n >= 1, "need at least one quantile fraction");
        Self {
            fractions: (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.fractions
    }
}

fn check_same_len(f: &QuantileDistribution, g: &QuantileDistribution) -> Result<(), QuantError> {
    if f.len() != g.len() {
        return Err(QuantError::DimensionMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    Ok(())
}

/// Signed directional comparison `(1/N) * sum_i (F_i - G_i)` (linear
/// transport cost, fixed to the identity). Negative means `g` is the
/// superior distribution, positive means `f` is.
pub fn directional_metric(
    f: &QuantileDistribution,
    g: &QuantileDistribution,
) -> Result<f64, QuantError> {
    check_same_len(f, g)?;
    let n = f.len() as f64;
    let sum: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a - b)
        .sum();
    Ok(sum / n)
}

/// p-Wasserstein distance `((1/N) * sum_i |F_i - G_i|^p)^(1/p)` between two
/// quantile representations of the same size.
pub fn wasserstein_p(
    f: &QuantileDistribution,
    g: &QuantileDistribution,
    p: f64,
) -> Result<f64, QuantError> {
    check_same_len(f, g)?;
    if p < 1.0 || !p.is_finite() || p.is_nan() {
        return Err(QuantError::OrderOutOfRange { p });
    }
    let n = f.len() as f64;
    let diffs = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs());
    let value = if p == 1.0 {
        diffs.sum::<f64>() / n
    } else if p == 2.0 {
        (diffs.map(|d| d * d).sum::<f64>() / n).sqrt()
    } else {
        (diffs.map(|d| d.powf(p)).sum::<f64>() / n).powf(1.0 / p)
    };
    Ok(value)
}

//! The fixed-topology MLP and its exact backward pass.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Layer sizes of the input -> hidden -> hidden -> output network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpShape {
    pub fn param_count(&self) -> usize {
        let (i, h, o) = (self.input, self.hidden, self.output);
        h * i + h + h * h + h + o * h + o
    }

    /// Offsets of the six parameter blocks in the flat vector:
    /// `[w1, b1, w2, b2, w3, b3]`, weights row-major (out x in).
    fn offsets(&self) -> [usize; 6] {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        [w1, b1, w2, b2, w3, b3]
    }
}

/// Two-hidden-layer perceptron with tanh activations and a linear output,
/// parameters stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    shape: MlpShape,
    params: Vec<f64>,
}

/// Fill a `rows x cols` row-major matrix with an orthogonal-style init:
/// Gaussian draws orthonormalized along the shorter dimension by modified
/// Gram-Schmidt, then scaled by `gain`.
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut m: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    if rows <= cols {
        // Orthonormalize the rows.
        for r in 0..rows {
            for prev in 0..r {
                let dot: f64 = (0..cols).map(|c| m[r * cols + c] * m[prev * cols + c]).sum();
                for c in 0..cols {
                    m[r * cols + c] -= dot * m[prev * cols + c];
                }
            }
            let norm: f64 = (0..cols).map(|c| m[r * cols + c] * m[r * cols + c]).sum::<f64>().sqrt();
            for c in 0..cols {
                m[r * cols + c] /= norm;
            }
        }
    } else {
        // Orthonormalize the columns.
        for c in 0..cols {
            for prev in 0..c {
                let dot: f64 = (0..rows).map(|r| m[r * cols + c] * m[r * cols + prev]).sum();
                for r in 0..rows {
                    m[r * cols + c] -= dot * m[r * cols + prev];
                }
            }
            let norm: f64 = (0..rows).map(|r| m[r * cols + c] * m[r * cols + c]).sum::<f64>().sqrt();
            for r in 0..rows {
                m[r * cols + c] /= norm;
            }
        }
    }
    for v in m.iter_mut() {
        *v *= gain;
    }
    m
}

impl Mlp {
    pub fn zeros(shape: MlpShape) -> Self {
        Self { shape, params: vec![0.0; shape.param_count()] }
    }

    /// Orthogonal init: gain sqrt(2) on the tanh hidden layers,
    /// `output_gain` on the linear head, zero biases.
    pub fn init(shape: MlpShape, rng: &mut ChaCha8Rng, output_gain: f64) -> Self {
        let mut net = Self::zeros(shape);
        let [w1, _, w2, _, w3, _] = shape.offsets();
        let gain = std::f64::consts::SQRT_2;
        let (i, h, o) = (shape.input, shape.hidden, shape.output);
        net.params[w1..w1 + h * i].copy_from_slice(&orthogonal_init(h, i, gain, rng));
        net.params[w2..w2 + h * h].copy_from_slice(&orthogonal_init(h, h, gain, rng));
        net.params[w3..w3 + o * h].copy_from_slice(&orthogonal_init(o, h, output_gain, rng));
        net
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len(), "parameter count mismatch");
        self.params.copy_from_slice(params);
    }

    fn affine(&self, w_off: usize, b_off: usize, rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &self.params[w_off + r * cols..w_off + (r + 1) * cols];
            let mut acc = self.params[b_off + r];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            out.push(acc);
        }
        out
    }

    /// Hidden activations and output; the cache the backward pass needs.
    fn forward_cached(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = self.shape;
        assert_eq!(input.len(), s.input, "input dimension mismatch");
        let [w1, b1, w2, b2, w3, b3] = s.offsets();
        let mut a1 = self.affine(w1, b1, s.hidden, s.input, input);
        for v in a1.iter_mut() {
            *v = v.tanh();
        }
        let mut a2 = self.affine(w2, b2, s.hidden, s.hidden, &a1);
        for v in a2.iter_mut() {
            *v = v.tanh();
        }
        let out = self.affine(w3, b3, s.output, s.hidden, &a2);
        (a1, a2, out)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).2
    }

    /// Exact gradient of `sum_k output_grad[k] * output[k]` with respect to
    /// every parameter, in the flat layout.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Vec<f64> {
        let s = self.shape;
        assert_eq!(output_grad.len(), s.output, "output gradient dimension mismatch");
        let (a1, a2, _) = self.forward_cached(input);
        let [w1o, b1o, w2o, b2o, w3o, b3o] = s.offsets();
        let mut grad = vec![0.0; s.param_count()];

        // Output layer: dW3 = og x a2, db3 = og, da2 = W3^T og.
        let mut da2 = vec![0.0; s.hidden];
        for r in 0..s.output {
            let og = output_grad[r];
            grad[b3o + r] = og;
            for c in 0..s.hidden {
                grad[w3o + r * s.hidden + c] = og * a2[c];
                da2[c] += self.params[w3o + r * s.hidden + c] * og;
            }
        }
        // Second hidden layer (tanh'(z) = 1 - a^2).
        let dz2: Vec<f64> = da2.iter().zip(&a2).map(|(g, a)| g * (1.0 - a * a)).collect();
        let mut da1 = vec![0.0; s.hidden];
        for r in 0..s.hidden {
            let g = dz2[r];
            grad[b2o + r] = g;
            for c in 0..s.hidden {
                grad[w2o + r * s.hidden + c] = g * a1[c];
                da1[c] += self.params[w2o + r * s.hidden + c] * g;
            }
        }
        // First hidden layer.
        let dz1: Vec<f64> = da1.iter().zip(&a1).map(|(g, a)| g * (1.0 - a * a)).collect();
        for r in 0..s.hidden {
            let g = dz1[r];
            grad[b1o + r] = g;
            for c in 0..s.input {
                grad[w1o + r * s.input + c] = g * input[c];
            }
        }
        grad
    }
}

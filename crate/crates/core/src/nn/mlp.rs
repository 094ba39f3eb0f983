use super::rng::RngStream;
use super::NnError;
use crate::numerics::DenseMatrix;
use serde::{Deserialize, Serialize};

/// Activation applied to the final layer; hidden layers are always
/// LeakyReLU with slope 0.2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

pub const LEAKY_SLOPE: f64 = 0.2;

fn leaky(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_prime(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected network, batch-rows convention: y = x W + b per layer,
/// weights of layer l have shape (fan_in, fan_out).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
    pub output_activation: OutputActivation,
}

/// Per-layer gradients (also reused as Adam moment storage).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            for v in w.as_mut_slice() {
                *v *= s;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (w, ow) in self.weights.iter_mut().zip(&other.weights) {
            for (v, o) in w.as_mut_slice().iter_mut().zip(ow.as_slice()) {
                *v += o;
            }
        }
        for (b, ob) in self.biases.iter_mut().zip(&other.biases) {
            for (v, o) in b.iter_mut().zip(ob) {
                *v += o;
            }
        }
    }
}

/// Forward-pass bookkeeping consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    batch: usize,
    /// a_0 (the input) through a_{L-1}: inputs to each layer.
    layer_inputs: Vec<DenseMatrix>,
    /// z_1 through z_L: pre-activations of each layer.
    pre_activations: Vec<DenseMatrix>,
}

impl ForwardCache {
    /// Pre-activation of the output layer (the logits when the output
    /// activation is sigmoid).
    pub fn logits(&self) -> &DenseMatrix {
        self.pre_activations.last().expect("nonempty network")
    }
}

/// Glorot-uniform weights, zero biases, drawn deterministically from the
/// stream in layer order (row-major within a layer).
pub fn init_mlp(
    layer_sizes: &[usize],
    output_activation: OutputActivation,
    rng: &mut RngStream,
) -> Result<Mlp, NnError> {
    if layer_sizes.len() < 2 {
        return Err(NnError::BadArchitecture("need at least two layers"));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(NnError::BadArchitecture("zero-width layer"));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = DenseMatrix::zeros(fan_in, fan_out);
        for v in w.as_mut_slice() {
            *v = rng.uniform_in(-bound, bound);
        }
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(Mlp {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        output_activation,
    })
}

impl Mlp {
    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Batch forward pass. Rows of `x` are samples.
    pub fn forward(&self, x: &DenseMatrix) -> (DenseMatrix, ForwardCache) {
        assert_eq!(x.cols(), self.input_width(), "input width mismatch");
        let batch = x.rows();
        let mut layer_inputs = Vec::with_capacity(self.layer_count());
        let mut pre_activations = Vec::with_capacity(self.layer_count());
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.matmul(w);
            for r in 0..batch {
                for (c, bc) in b.iter().enumerate() {
                    z[(r, c)] += bc;
                }
            }
            layer_inputs.push(a);
            let last = l + 1 == self.layer_count();
            let mut out = z.clone();
            if !last {
                for v in out.as_mut_slice() {
                    *v = leaky(*v);
                }
            } else {
                match self.output_activation {
                    OutputActivation::Linear => {}
                    OutputActivation::Sigmoid => {
                        for v in out.as_mut_slice() {
                            *v = sigmoid(*v);
                        }
                    }
                }
            }
            pre_activations.push(z);
            a = out;
        }
        let cache = ForwardCache {
            layer_sizes: self.layer_sizes.clone(),
            batch,
            layer_inputs,
            pre_activations,
        };
        (a, cache)
    }

    /// Reverse pass from a gradient w.r.t. the network OUTPUTS (after the
    /// output activation). Returns parameter gradients and the gradient
    /// w.r.t. the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &DenseMatrix,
    ) -> (Gradients, DenseMatrix) {
        let z_last = cache.pre_activations.last().expect("nonempty");
        let mut delta = output_grad.clone();
        match self.output_activation {
            OutputActivation::Linear => {}
            OutputActivation::Sigmoid => {
                for (d, &z) in delta.as_mut_slice().iter_mut().zip(z_last.as_slice()) {
                    let s = sigmoid(z);
                    *d *= s * (1.0 - s);
                }
            }
        }
        self.backprop_from_last_preactivation(cache, delta)
    }

    /// Reverse pass from a gradient w.r.t. the output-layer PRE-activation
    /// (the logits). Used when the loss folds the output activation in for
    /// numerical stability (sigmoid + cross-entropy).
    pub fn backward_from_logits(
        &self,
        cache: &ForwardCache,
        logit_grad: &DenseMatrix,
    ) -> (Gradients, DenseMatrix) {
        self.backprop_from_last_preactivation(cache, logit_grad.clone())
    }

    fn backprop_from_last_preactivation(
        &self,
        cache: &ForwardCache,
        mut delta: DenseMatrix,
    ) -> (Gradients, DenseMatrix) {
        assert_eq!(
            cache.layer_sizes, self.layer_sizes,
            "cache belongs to a different network"
        );
        assert_eq!(delta.rows(), cache.batch, "batch mismatch");
        assert_eq!(delta.cols(), self.output_width(), "output width mismatch");

        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layer_count()).rev() {
            let a_in = &cache.layer_inputs[l];
            // dW = a_in^T delta ; db = column sums of delta.
            grads.weights[l] = a_in.transpose().matmul(&delta);
            for r in 0..delta.rows() {
                for c in 0..delta.cols() {
                    grads.biases[l][c] += delta[(r, c)];
                }
            }
            // Propagate: delta_prev = (delta W^T) had' (z_{l-1}).
            let mut prev = delta.matmul(&self.weights[l].transpose());
            if l > 0 {
                let z_prev = &cache.pre_activations[l - 1];
                for (d, &z) in prev.as_mut_slice().iter_mut().zip(z_prev.as_slice()) {
                    *d *= leaky_prime(z);
                }
            }
            delta = prev;
        }
        (grads, delta)
    }
}

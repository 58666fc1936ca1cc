//! Feedforward embedding network with hand-written backpropagation and Adam.
//!
//! The network maps an input of length `layer_dims[0]` to an embedding of
//! length `layer_dims.last()`. Hidden layers use a rectifier; the output layer
//! is affine. Weights are stored row-major as `out x in` matrices.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hidden and output sizes for a given input dimension.
pub fn default_layer_dims(input_dim: usize) -> Vec<usize> {
    vec![input_dim, 64, 32]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    normalize: bool,
}

/// Parameter-shaped buffers. Used for gradients and for Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGradients {
    pub fn zeros_like(net: &EmbeddingNet) -> Self {
        NetGradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= factor);
        }
    }

    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter()).flatten()
    }

    fn same_shape(&self, other: &NetGradients) -> bool {
        self.weights.len() == other.weights.len()
            && self.biases.len() == other.biases.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.len() == b.len())
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
    activations: Vec<Vec<f64>>,
    /// Output before optional L2 normalization.
    raw_output: Vec<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidParameter(
            "layer_dims needs at least an input and an output size".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidParameter("layer sizes must be positive".into()));
    }
    Ok(())
}

impl EmbeddingNet {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_dims: &[usize], rng: &mut crate::rng::Rng) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect(),
            );
        }
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(EmbeddingNet {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            normalize: false,
        })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(EmbeddingNet {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            normalize: false,
        })
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers {
            return Err(Error::Shape {
                expected: layers,
                actual: weights.len(),
            });
        }
        if biases.len() != layers {
            return Err(Error::Shape {
                expected: layers,
                actual: biases.len(),
            });
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::Shape {
                    expected: pair[0] * pair[1],
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::Shape {
                    expected: pair[1],
                    actual: biases[l].len(),
                });
            }
        }
        Ok(EmbeddingNet {
            layer_dims,
            weights,
            biases,
            normalize: false,
        })
    }

    /// L2-normalize the output embedding. Off by default.
    pub fn with_normalized_output(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn normalizes_output(&self) -> bool {
        self.normalize
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.activations.pop().unwrap())
    }

    /// Embeds every row of a row-major `n x input_dim` matrix.
    pub fn embed_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.forward(r)).collect()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let layers = self.weights.len();
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(x.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &activations[l];
            let w = &self.weights[l];
            let mut out = self.biases[l].clone();
            for (o, out_o) in out.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *out_o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            debug_assert_eq!(out.len(), n_out);
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        let raw_output = activations.last().unwrap().clone();
        if self.normalize {
            let norm = raw_output.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                activations.last_mut().unwrap().iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(ForwardTrace {
            activations,
            raw_output,
        })
    }

    /// Gradients of a scalar objective given `grad_out = dL/d f(x)`.
    /// Returns parameter gradients and `dL/dx`.
    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<(NetGradients, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        let mut grads = NetGradients::zeros_like(self);
        let dx = self.backward_into(&trace, grad_out, &mut grads)?;
        Ok((grads, dx))
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        grad_out: &[f64],
        grads: &mut NetGradients,
    ) -> Result<Vec<f64>> {
        if grad_out.len() != self.output_dim() {
            return Err(Error::Shape {
                expected: self.output_dim(),
                actual: grad_out.len(),
            });
        }
        let mut delta = grad_out.to_vec();
        if self.normalize {
            let norm = trace.raw_output.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                let y = trace.output();
                let dot: f64 = y.iter().zip(&delta).map(|(a, b)| a * b).sum();
                delta = delta
                    .iter()
                    .zip(y)
                    .map(|(g, yi)| (g - yi * dot) / norm)
                    .collect();
            }
        }
        let layers = self.weights.len();
        for l in (0..layers).rev() {
            let n_in = self.layer_dims[l];
            let input = &trace.activations[l];
            // Rectifier derivative, taken as 0 at the kink.
            if l + 1 < layers {
                let post = &trace.activations[l + 1];
                for (d, &a) in delta.iter_mut().zip(post) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let gw = &mut grads.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
            }
            grads.biases[l]
                .iter_mut()
                .zip(&delta)
                .for_each(|(g, d)| *g += d);
            let w = &self.weights[l];
            let mut next = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                next.iter_mut().zip(row).for_each(|(n, wv)| *n += d * wv);
            }
            delta = next;
        }
        Ok(delta)
    }

    pub fn save(&self, path: &Path, seed: u64) -> Result<()> {
        let text = serde_json::to_string_pretty(&Checkpoint::from_net(self, seed))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Returns the network and the seed it was trained with.
    pub fn load(path: &Path) -> Result<(Self, u64)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.into_net()
    }
}

/// On-disk model record. Weights are flattened row-major per layer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default)]
    pub normalize: bool,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_net(net: &EmbeddingNet, seed: u64) -> Self {
        Checkpoint {
            layer_dims: net.layer_dims.clone(),
            weights: net.weights.clone(),
            biases: net.biases.clone(),
            normalize: net.normalize,
            seed,
        }
    }

    pub fn into_net(self) -> Result<(EmbeddingNet, u64)> {
        let net = EmbeddingNet::from_parts(self.layer_dims, self.weights, self.biases)?
            .with_normalized_output(self.normalize);
        Ok((net, self.seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first_moment: NetGradients,
    second_moment: NetGradients,
}

impl AdamState {
    pub fn new(net: &EmbeddingNet, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first_moment: NetGradients::zeros_like(net),
            second_moment: NetGradients::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut EmbeddingNet, state: &mut AdamState, grads: &NetGradients) -> Result<()> {
    let shape = NetGradients::zeros_like(net);
    if !grads.same_shape(&shape) || !state.first_moment.same_shape(&shape) {
        return Err(Error::Shape {
            expected: net.param_count(),
            actual: grads.iter().count(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradients"));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    };
    for l in 0..net.weights.len() {
        update(
            &mut net.weights[l],
            &grads.weights[l],
            &mut state.first_moment.weights[l],
            &mut state.second_moment.weights[l],
        );
        update(
            &mut net.biases[l],
            &grads.biases[l],
            &mut state.first_moment.biases[l],
            &mut state.second_moment.biases[l],
        );
    }
    Ok(())
}

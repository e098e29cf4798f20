use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor2;

/// One affine layer: weight is (in x out), bias one entry per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

/// A multi-layer perceptron: rectifier on hidden layers, identity on the
/// final layer. The same structure doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer inputs captured during the forward pass. `activations[l]` is
/// the input to layer l; the last entry is the network output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub activations: Vec<Tensor2>,
}

impl MlpParams {
    /// Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    /// `dims` lists the unit counts from input to output, e.g. [4, 64, 3].
    pub fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut weight = Tensor2::zeros(fan_in, fan_out);
            for v in weight.data.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
            layers.push(DenseLayer {
                weight,
                bias: vec![0.0; fan_out],
            });
        }
        MlpParams { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer {
                weight: Tensor2::zeros(w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        MlpParams { layers }
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: Tensor2::zeros(l.weight.rows, l.weight.cols),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.cols
    }

    /// Zero the last layer's weight and bias. Used so auto-registration
    /// starts disabled: a zeroed offset head makes the offset vanish.
    pub fn zero_final_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.weight.data.iter_mut().for_each(|v| *v = 0.0);
        last.bias.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Forward pass. Hidden layers apply max(z, 0); the final layer is
    /// affine only. The cache suffices for an exact backward pass.
    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        if input.cols != self.input_dim() {
            return Err(Error::argument(format!(
                "mlp input has {} columns, expected {}",
                input.cols,
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = activations[l].matmul(&layer.weight)?;
            for i in 0..z.rows {
                let row = z.row_mut(i);
                for (v, b) in row.iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            if l < last {
                for v in z.data.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, MlpCache { activations }))
    }

    /// Exact reverse-mode gradients of the forward map.
    /// Returns (per-parameter gradients, gradient w.r.t. the input rows).
    pub fn backward(&self, cache: &MlpCache, grad_out: &Tensor2) -> Result<(MlpParams, Tensor2)> {
        let last = self.layers.len() - 1;
        let out = cache.activations.last().unwrap();
        if grad_out.rows != out.rows || grad_out.cols != out.cols {
            return Err(Error::argument("grad_out shape mismatch"));
        }
        let mut grads = self.zeros_like();
        let mut delta = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                // rectifier mask taken from the cached post-activation
                let act = &cache.activations[l + 1];
                for (d, &a) in delta.data.iter_mut().zip(&act.data) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.activations[l];
            grads.layers[l].weight = x.t_matmul(&delta)?;
            for i in 0..delta.rows {
                for (gb, &d) in grads.layers[l].bias.iter_mut().zip(delta.row(i)) {
                    *gb += d;
                }
            }
            delta = delta.matmul_t(&self.layers[l].weight)?;
        }
        Ok((grads, delta))
    }

    /// Sum of |w| over weight matrices (biases excluded).
    pub fn weight_abs_sum(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.data.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    /// Add sign(w) * factor to the weight gradients (L1 subgradient).
    pub fn add_l1_subgradient(&self, grads: &mut MlpParams, factor: f64) {
        for (l, g) in self.layers.iter().zip(&mut grads.layers) {
            for (w, gw) in l.weight.data.iter().zip(&mut g.weight.data) {
                *gw += factor * w.signum();
            }
        }
    }

    /// params += factor * other, entry-wise over weights and biases.
    pub fn add_scaled(&mut self, other: &MlpParams, factor: f64) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            for (w, ow) in l.weight.data.iter_mut().zip(&o.weight.data) {
                *w += factor * ow;
            }
            for (b, ob) in l.bias.iter_mut().zip(&o.bias) {
                *b += factor * ob;
            }
        }
    }

    /// Visit every parameter scalar in a fixed order.
    pub fn for_each(&self, f: &mut impl FnMut(f64)) {
        for l in &self.layers {
            l.weight.data.iter().for_each(|&v| f(v));
            l.bias.iter().for_each(|&v| f(v));
        }
    }

    /// Mutably visit every parameter scalar in the same fixed order.
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            l.weight.data.iter_mut().for_each(|v| f(v));
            l.bias.iter_mut().for_each(|v| f(v));
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data.len() + l.bias.len())
            .sum()
    }
}

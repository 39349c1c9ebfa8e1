//! Dense multilayer perceptron with hand-rolled forward and backward passes,
//! f64 throughout. Small enough that plain SGD on CPU is the right tool.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activated output.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    inputs: usize,
    outputs: usize,
    activation: Activation,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o];
            out.push(self.activation.apply(z));
        }
    }
}

/// Per-layer gradients, flat like the owning network's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients { values: vec![0.0; net.param_count()] }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn add(&mut self, other: &Gradients) {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Activations recorded by a cached forward pass; layer 0 is the input.
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input layer")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    sizes: Vec<usize>,
}

impl Mlp {
    /// Xavier-uniform initialization; `output` names the last layer's
    /// activation, all earlier layers use `hidden`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut rng::Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config("mlp needs input and output sizes".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Config("mlp layer sizes must be positive".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (idx, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
                inputs: fan_in,
                outputs: fan_out,
                activation: if idx == sizes.len() - 2 { output } else { hidden },
            });
        }
        Ok(Mlp { layers, sizes: sizes.to_vec() })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_size());
        let mut current = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Forward pass that keeps every layer's activations for [`Mlp::backward`].
    pub fn forward_cached(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.input_size());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward(activations.last().expect("nonempty"), &mut out);
            activations.push(out);
        }
        Trace { activations }
    }

    /// Backpropagates `dl_dy` (gradient of a scalar loss w.r.t. the output)
    /// through a cached trace. Returns parameter gradients and the gradient
    /// w.r.t. the network input.
    pub fn backward(&self, trace: &Trace, dl_dy: &[f64]) -> (Gradients, Vec<f64>) {
        debug_assert_eq!(dl_dy.len(), self.output_size());
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = trace
            .activations
            .last()
            .expect("nonempty")
            .iter()
            .zip(dl_dy)
            .map(|(&y, &g)| g * self.layers.last().expect("nonempty").activation.derivative(y))
            .collect();

        let mut offset = grads.values.len();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[l];
            offset -= layer.weights.len() + layer.biases.len();
            let (w_slot, b_slot) = grads.values[offset..offset + layer.weights.len() + layer.biases.len()]
                .split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                b_slot[o] += d;
                let row = &mut w_slot[o * layer.inputs..(o + 1) * layer.inputs];
                for (slot, &x) in row.iter_mut().zip(input) {
                    *slot += d * x;
                }
            }
            // gradient flowing to the previous layer's activations
            let mut upstream = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += d * w;
                }
            }
            if l > 0 {
                let prev_activation = self.layers[l - 1].activation;
                delta = upstream
                    .iter()
                    .zip(&trace.activations[l])
                    .map(|(&u, &y)| u * prev_activation.derivative(y))
                    .collect();
            } else {
                delta = upstream;
            }
        }
        (grads, delta)
    }

    /// θ ← θ − lr · g.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w -= lr * grads.values[offset];
                offset += 1;
            }
        }
    }

    /// θ ← τ·online + (1−τ)·θ.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        debug_assert_eq!(self.sizes, online.sizes);
        for (mine, theirs) in self.layers.iter_mut().zip(&online.layers) {
            for (a, b) in mine
                .weights
                .iter_mut()
                .chain(mine.biases.iter_mut())
                .zip(theirs.weights.iter().chain(theirs.biases.iter()))
            {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = flat[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|w| w.is_finite()))
    }
}

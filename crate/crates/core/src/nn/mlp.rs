use rand::Rng;

use super::{Affine, Gradients, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stack of affine layers with an activation between consecutive layers.
///
/// The last layer is linear unless `activate_output` is set.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Affine>,
    pub activation: Activation,
    pub activate_output: bool,
}

/// Per-layer inputs and outputs kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// `inputs[l]` is the input of layer `l`; the final element is the network output.
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input")
    }
}

impl Mlp {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        dims: &[usize],
        activation: Activation,
        activate_output: bool,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Affine::new(params, &format!("{prefix}.{i}"), d[0], d[1], rng))
            .collect();
        Self {
            layers,
            activation,
            activate_output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 < self.layers.len() || self.activate_output {
            self.activation
        } else {
            Activation::Identity
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &[f64]) -> Result<MlpTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("mlp input", self.input_dim(), x.len()));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(l);
            let mut y = layer.forward(params, activations.last().unwrap())?;
            y.iter_mut().for_each(|v| *v = act.apply(*v));
            activations.push(y);
        }
        Ok(MlpTrace { activations })
    }

    /// Accumulates gradients; returns `d loss / d input`.
    pub fn backward(
        &self,
        params: &ParamSet,
        trace: &MlpTrace,
        d_out: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = self.activation_of(l);
            let y = &trace.activations[l + 1];
            for (d, &yv) in delta.iter_mut().zip(y) {
                *d *= act.derivative_from_output(yv);
            }
            delta = layer.backward(params, &trace.activations[l], &delta, grads);
        }
        delta
    }
}

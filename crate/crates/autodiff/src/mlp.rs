//! Fully connected layers with a shared hidden activation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{BoundParams, Graph, Var};
use crate::{AutodiffError, ParamId, ParamSet, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply_graph(self, graph: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => graph.tanh(x),
            Activation::Relu => graph.relu(x),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Layer {
    weight: ParamId,
    bias: ParamId,
}

/// Layout of an MLP inside a [`ParamSet`]; weights are `fan_in × fan_out`
/// so a batch of row inputs is multiplied on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    hidden: Activation,
}

impl Mlp {
    /// Registers the layers in `params`, initialized uniformly in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        sizes: &[usize],
        hidden: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut sample = |n: usize| -> Vec<f64> {
                    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
                };
                let weight = Tensor::from_vec(fan_in, fan_out, sample(fan_in * fan_out))
                    .expect("sized by construction");
                let bias = Tensor::row_vector(sample(fan_out));
                Layer {
                    weight: params.add(format!("{prefix}.l{l}.weight"), weight),
                    bias: params.add(format!("{prefix}.l{l}.bias"), bias),
                }
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.hidden
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weight, l.bias])
    }

    fn check_input(&self, shape: (usize, usize)) -> Result<(), AutodiffError> {
        if shape.1 != self.input_dim() {
            return Err(AutodiffError::ShapeMismatch {
                op: "mlp_forward",
                left: shape,
                right: (self.input_dim(), self.sizes[1]),
            });
        }
        Ok(())
    }

    /// Records the forward pass of a `batch × input_dim` input in `graph`.
    pub fn forward(&self, graph: &mut Graph, bound: &BoundParams, input: Var) -> Result<Var, AutodiffError> {
        self.check_input(graph.value(input).shape())?;
        let mut x = input;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = graph.matmul(x, bound.get(layer.weight));
            x = graph.add_row(z, bound.get(layer.bias));
            if l + 1 < self.layers.len() {
                x = self.hidden.apply_graph(graph, x);
            }
        }
        Ok(x)
    }

    /// Graph-free forward pass with the same arithmetic as [`Mlp::forward`].
    pub fn forward_plain(&self, params: &ParamSet, input: &Tensor) -> Result<Tensor, AutodiffError> {
        self.check_input(input.shape())?;
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            x = x.matmul(params.get(layer.weight))?.add_row(params.get(layer.bias))?;
            if l + 1 < self.layers.len() {
                let act = self.hidden;
                x = x.map(|v| act.apply(v));
            }
        }
        Ok(x)
    }
}

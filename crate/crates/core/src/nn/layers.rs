use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Tanh,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu(0.01)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the input `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leaky_relu" | "leakyrelu" => Ok(Activation::default()),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::config(format!("unknown activation {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Affine map `x · W + b` with `W: in × out`, `b: 1 × out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Glorot-uniform weights, zero bias; names are `{name}.weight` and
    /// `{name}.bias`.
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, seed: u64) -> Result<Self> {
        let weight = store.add_glorot(format!("{name}.weight"), input, output, seed)?;
        let bias = store.add(format!("{name}.bias"), ndarray::Array2::zeros((1, output)))?;
        Ok(Linear { weight, bias })
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).nrows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).ncols()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }
}

/// Stack of affine layers with a nonlinearity after every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; layer `i` is named `{name}.{i}`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("an MLP needs at least input and output dims"));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers, activation })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var) -> Result<Var> {
        mlp_forward(tape, store, &self.layers, self.activation, input)
    }
}

/// Affine → nonlinearity per hidden layer; the final layer is affine only.
pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    layers: &[Linear],
    activation: Activation,
    input: Var,
) -> Result<Var> {
    let mut expected = tape.value(input).ncols();
    for l in layers {
        if l.input_dim(store) != expected {
            return Err(Error::shape(format!(
                "layer expects {} inputs, got {expected}",
                l.input_dim(store)
            )));
        }
        expected = l.output_dim(store);
    }
    let mut h = input;
    for (i, l) in layers.iter().enumerate() {
        h = l.forward(tape, store, h)?;
        if i + 1 < layers.len() {
            h = tape.activate(h, activation)?;
        }
    }
    Ok(h)
}

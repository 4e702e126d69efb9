//! Feed-forward network description, exact evaluation, and the weight file.
//!
//! # Weight file
//!
//! A JSON document:
//!
//! ```json
//! {
//!   "format": "reachguard-network/1",
//!   "input_dim": 3,
//!   "output_dim": 2,
//!   "layers": [
//!     { "activation": "relu", "rows": 64, "cols": 3,
//!       "weights": [ ...rows*cols numbers, row-major... ],
//!       "bias": [ ...rows numbers... ] },
//!     ...
//!   ]
//! }
//! ```
//!
//! Numbers are written in the shortest decimal form that parses back to
//! the identical `f64`, so a file reproduces its network bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHT_FORMAT: &str = "reachguard-network/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::UnsupportedActivation(other.to_string())),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// Affine map `W x + b` followed by an activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Row-major, `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::InvalidNetwork(format!(
                "weight array has {} entries, expected {rows}x{cols}",
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(Error::InvalidNetwork(format!(
                "bias has {} entries, expected {rows}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite parameter".into()));
        }
        Ok(Layer {
            weights,
            bias,
            rows,
            cols,
            activation,
        })
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.cols..(j + 1) * self.cols]
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|j| {
                self.row(j)
                    .iter()
                    .zip(x)
                    .fold(self.bias[j], |acc, (w, v)| acc + w * v)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    /// Checks that layer shapes chain and the output layer is linear.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].cols != pair[0].rows {
                return Err(Error::InvalidNetwork(format!(
                    "layer of width {} feeds a layer expecting {}",
                    pair[0].rows, pair[1].cols
                )));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::InvalidNetwork("final activation must be identity".into()));
        }
        Ok(NetworkSpec { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Exact forward pass.
    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.affine(&x);
            for v in &mut x {
                *v = layer.activation.apply(*v);
            }
        }
        Ok(x)
    }

    /// Serializes to the weight-file JSON.
    pub fn to_json(&self) -> String {
        let doc = WeightFile {
            format: WEIGHT_FORMAT.to_string(),
            input_dim: self.input_dim(),
            output_dim: self.output_dim(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    activation: l.activation.name().to_string(),
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightFile =
            serde_json::from_str(text).map_err(|e| Error::parse("weight file", e))?;
        if doc.format != WEIGHT_FORMAT {
            return Err(Error::parse(
                "weight file",
                format!("unknown format tag `{}`", doc.format),
            ));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|r| {
                let act = Activation::parse(&r.activation)?;
                Layer::new(r.rows, r.cols, r.weights, r.bias, act)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = NetworkSpec::new(layers)?;
        if net.input_dim() != doc.input_dim || net.output_dim() != doc.output_dim {
            return Err(Error::InvalidNetwork(format!(
                "declared {}->{} but layers give {}->{}",
                doc.input_dim,
                doc.output_dim,
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        NetworkSpec::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    format: String,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    activation: String,
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_layer(n: usize, act: Activation) -> Layer {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        Layer::new(n, n, w, vec![0.0; n], act).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = NetworkSpec::new(vec![
            Layer::new(4, 3, vec![0.0; 12], vec![0.0; 4], Activation::Relu).unwrap(),
            Layer::new(2, 4, vec![0.0; 8], vec![0.0; 2], Activation::Identity).unwrap(),
        ])
        .unwrap();
        assert_eq!(net.eval(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let net = NetworkSpec::new(vec![
            identity_layer(3, Activation::Relu),
            identity_layer(3, Activation::Identity),
        ])
        .unwrap();
        assert_eq!(net.eval(&[-1.0, 2.0, 0.0]).unwrap(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_activations() {
        assert!(matches!(
            NetworkSpec::new(vec![identity_layer(3, Activation::Relu)]),
            Err(Error::InvalidNetwork(_))
        ));
        let a = Layer::new(4, 3, vec![0.0; 12], vec![0.0; 4], Activation::Relu).unwrap();
        let b = Layer::new(2, 5, vec![0.0; 10], vec![0.0; 2], Activation::Identity).unwrap();
        assert!(NetworkSpec::new(vec![a, b]).is_err());
        assert!(matches!(Activation::parse("tanh"), Err(Error::UnsupportedActivation(_))));
        let net = NetworkSpec::new(vec![identity_layer(3, Activation::Identity)]).unwrap();
        assert!(matches!(
            net.eval(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn weight_file_rejects_tanh() {
        let net = NetworkSpec::new(vec![identity_layer(3, Activation::Identity)]).unwrap();
        let text = net.to_json().replace("identity", "tanh");
        assert!(matches!(NetworkSpec::from_json(&text), Err(Error::UnsupportedActivation(_))));
    }

    proptest! {
        #[test]
        fn weight_file_round_trips_bitwise(ws in proptest::collection::vec(-1e3f64..1e3, 12), bs in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let net = NetworkSpec::new(vec![
                Layer::new(4, 3, ws, bs, Activation::Relu).unwrap(),
                Layer::new(2, 4, vec![0.1, -0.2, 1.0/3.0, 1e-17, 5.0, 6.0, 7.0, f64::MIN_POSITIVE], vec![0.0, -0.0], Activation::Identity).unwrap(),
            ]).unwrap();
            let back = NetworkSpec::from_json(&net.to_json()).unwrap();
            for (a, b) in net.layers.iter().zip(&back.layers) {
                prop_assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
                prop_assert!(a.bias.iter().zip(&b.bias).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            prop_assert_eq!(back.to_json(), net.to_json());
        }
    }
}

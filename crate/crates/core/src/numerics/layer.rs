//! Dense layers and feed-forward networks with explicit reverse-mode
//! gradients.
//!
//! Weights are stored input-major: row `j` holds the `d_out` weights fanning
//! out of input `j`. Forward and backward passes skip zero inputs, which keeps
//! sparse inputs such as interaction profiles cheap.

use serde::{Deserialize, Serialize};

use super::params::{BlockInfo, Parameterized};
use super::rng::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    d_in: usize,
    d_out: usize,
    /// `d_in x d_out`, input-major.
    pub weights: Vec<f64>,
    /// Length `d_out`, or empty for a bias-free layer.
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights in `±sqrt(6 / (d_in + d_out))`, zero bias.
    pub fn new(
        d_in: usize,
        d_out: usize,
        activation: Activation,
        with_bias: bool,
        rng: &mut SeededRng,
    ) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let weights = (0..d_in * d_out)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Self {
            d_in,
            d_out,
            weights,
            bias: if with_bias { vec![0.0; d_out] } else { Vec::new() },
            activation,
        }
    }

    /// Builds a layer from a row-major `d_out x d_in` matrix.
    pub fn from_matrix(
        matrix: &[Vec<f64>],
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let d_out = matrix.len();
        let d_in = matrix.first().map_or(0, |r| r.len());
        if matrix.iter().any(|r| r.len() != d_in) {
            return Err(Error::invalid("ragged weight matrix"));
        }
        if !bias.is_empty() && bias.len() != d_out {
            return Err(Error::Dimension {
                expected: d_out,
                actual: bias.len(),
                context: "bias".into(),
            });
        }
        let mut weights = vec![0.0; d_in * d_out];
        for (o, row) in matrix.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                weights[j * d_out + o] = w;
            }
        }
        Ok(Self {
            d_in,
            d_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn identity(d: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|o| (0..d).map(|j| if j == o { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_matrix(&rows, Vec::new(), Activation::Identity).expect("square identity")
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn has_bias(&self) -> bool {
        !self.bias.is_empty()
    }

    /// Weight from input `j` to output `o`.
    pub fn weight(&self, o: usize, j: usize) -> f64 {
        self.weights[j * self.d_out + o]
    }

    pub fn zero_grads(&self) -> LayerGrads {
        LayerGrads {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: x.len(),
                context: "layer input".into(),
            });
        }
        let mut out = if self.bias.is_empty() {
            vec![0.0; self.d_out]
        } else {
            self.bias.clone()
        };
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let row = &self.weights[j * self.d_out..(j + 1) * self.d_out];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xj;
            }
        }
        for o in &mut out {
            *o = self.activation.apply(*o);
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for one example and returns the
    /// upstream gradient w.r.t. `x` when `want_input` is set.
    ///
    /// `y` must be this layer's output for `x`.
    pub fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        d_y: &[f64],
        grads: &mut LayerGrads,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let delta: Vec<f64> = y
            .iter()
            .zip(d_y)
            .map(|(&yo, &g)| g * self.activation.derivative_from_output(yo))
            .collect();
        if !grads.bias.is_empty() {
            for (b, d) in grads.bias.iter_mut().zip(&delta) {
                *b += d;
            }
        }
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let row = &mut grads.weights[j * self.d_out..(j + 1) * self.d_out];
            for (g, d) in row.iter_mut().zip(&delta) {
                *g += xj * d;
            }
        }
        want_input.then(|| {
            (0..self.d_in)
                .map(|j| {
                    let row = &self.weights[j * self.d_out..(j + 1) * self.d_out];
                    row.iter().zip(&delta).map(|(w, d)| w * d).sum()
                })
                .collect()
        })
    }

    fn push_block_info(&self, prefix: &str, out: &mut Vec<BlockInfo>) {
        out.push(BlockInfo::new(
            format!("{prefix}.weight"),
            vec![self.d_in, self.d_out],
        ));
        if self.has_bias() {
            out.push(BlockInfo::new(format!("{prefix}.bias"), vec![self.d_out]));
        }
    }
}

impl LayerGrads {
    pub(crate) fn push_blocks<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(&self.weights);
        if !self.bias.is_empty() {
            out.push(&self.bias);
        }
    }

    pub(crate) fn push_blocks_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(&mut self.weights);
        if !self.bias.is_empty() {
            out.push(&mut self.bias);
        }
    }
}

/// Ordered stack of dense layers. An empty stack is the identity on `d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    d_in: usize,
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

/// Forward values recorded for one input: the input followed by every layer
/// output.
#[derive(Debug, Clone)]
pub struct GradientTape {
    activations: Vec<Vec<f64>>,
}

impl GradientTape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape holds at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let d_in = layers
            .first()
            .map(|l| l.d_in())
            .ok_or_else(|| Error::invalid("network needs at least one layer; use Network::identity"))?;
        for pair in layers.windows(2) {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::Dimension {
                    expected: pair[0].d_out(),
                    actual: pair[1].d_in(),
                    context: "adjacent layer dimensions".into(),
                });
            }
        }
        Ok(Self { d_in, layers })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d_in: d,
            layers: Vec::new(),
        }
    }

    /// `sizes = [d_in, h1, ..., d_out]`; relu on hidden layers, identity on the
    /// last one.
    pub fn mlp(sizes: &[usize], with_bias: bool, rng: &mut SeededRng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid("mlp needs at least input and output sizes"));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::new(sizes[i], sizes[i + 1], act, with_bias, rng)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(self.d_in, |l| l.d_out())
    }

    pub fn zero_grads(&self) -> NetworkGrads {
        NetworkGrads {
            layers: self.layers.iter().map(|l| l.zero_grads()).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: x.len(),
                context: "network input".into(),
            });
        }
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_tape(&self, x: &[f64]) -> Result<GradientTape> {
        if x.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: x.len(),
                context: "network input".into(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(GradientTape { activations })
    }

    /// Accumulates parameter gradients into `grads` for upstream gradient
    /// `d_out` and returns the gradient w.r.t. the network input when asked.
    pub fn backward(
        &self,
        tape: &GradientTape,
        d_out: &[f64],
        grads: &mut NetworkGrads,
        want_input: bool,
    ) -> Result<Option<Vec<f64>>> {
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(Error::invalid(format!(
                "tape records {} layers, network has {}",
                tape.activations.len() - 1,
                self.layers.len()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::invalid("gradient buffer does not match network"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if tape.activations[i].len() != layer.d_in()
                || tape.activations[i + 1].len() != layer.d_out()
            {
                return Err(Error::invalid(format!("tape shape mismatch at layer {i}")));
            }
        }
        if d_out.len() != self.d_out() {
            return Err(Error::Dimension {
                expected: self.d_out(),
                actual: d_out.len(),
                context: "upstream gradient".into(),
            });
        }
        let mut upstream = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let need = want_input || i > 0;
            let layer = &self.layers[i];
            let next = layer.backward(
                &tape.activations[i],
                &tape.activations[i + 1],
                &upstream,
                &mut grads.layers[i],
                need,
            );
            if let Some(next) = next {
                upstream = next;
            }
        }
        Ok(want_input.then_some(upstream))
    }

    pub(crate) fn block_info_prefixed(&self, prefix: &str) -> Vec<BlockInfo> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.push_block_info(&format!("{prefix}.{i}"), &mut out);
        }
        out
    }
}

impl Parameterized for DenseLayer {
    fn block_info(&self) -> Vec<BlockInfo> {
        let mut out = Vec::new();
        self.push_block_info("layer", &mut out);
        out
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.weights];
        if self.has_bias() {
            out.push(&self.bias);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let has_bias = self.has_bias();
        let mut out: Vec<&mut [f64]> = vec![&mut self.weights];
        if has_bias {
            out.push(&mut self.bias);
        }
        out
    }
}

impl Parameterized for Network {
    fn block_info(&self) -> Vec<BlockInfo> {
        self.block_info_prefixed("layer")
    }

    fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.blocks()).collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.blocks_mut()).collect()
    }
}

impl NetworkGrads {
    pub(crate) fn push_blocks<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        for l in &self.layers {
            l.push_blocks(out);
        }
    }

    pub(crate) fn push_blocks_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for l in &mut self.layers {
            l.push_blocks_mut(out);
        }
    }
}

impl DenseLayer {
    pub(crate) fn block_info_prefixed(&self, prefix: &str) -> Vec<BlockInfo> {
        let mut out = Vec::new();
        self.push_block_info(prefix, &mut out);
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_through() {
        let layer = DenseLayer::identity(3);
        let x = [1.5, -2.0, 0.25];
        assert_eq!(layer.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn relu_on_negative_preactivations_is_zero() {
        let layer = DenseLayer::from_matrix(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(layer.forward(&[-1.0, -3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_matches_hand_evaluation() {
        let mut rng = SeededRng::new(5);
        let net = Network::mlp(&[3, 4, 2], true, &mut rng).unwrap();
        let mut net = net;
        for (i, b) in net.layers[0].bias.iter_mut().enumerate() {
            *b = 0.1 * i as f64 - 0.15;
        }
        let x = [0.3, -1.2, 0.8];
        // hand evaluation with row-major products
        let l0 = &net.layers[0];
        let h: Vec<f64> = (0..4)
            .map(|o| {
                let z: f64 = (0..3).map(|j| l0.weight(o, j) * x[j]).sum::<f64>() + l0.bias[o];
                z.max(0.0)
            })
            .collect();
        let l1 = &net.layers[1];
        let y: Vec<f64> = (0..2)
            .map(|o| (0..4).map(|j| l1.weight(o, j) * h[j]).sum::<f64>() + l1.bias[o])
            .collect();
        let out = net.forward(&x).unwrap();
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let net = Network::identity(3);
        assert!(net.forward(&[1.0, 2.0]).is_err());
        let layer = DenseLayer::identity(2);
        assert!(layer.forward(&[1.0]).is_err());
    }

    #[test]
    fn half_squared_norm_gives_input_gradient() {
        let net = Network::from_layers(vec![DenseLayer::identity(3)]).unwrap();
        let x = [0.5, -1.0, 2.0];
        let tape = net.forward_tape(&x).unwrap();
        // d/dy of 0.5 |y|^2 is y
        let d_y = tape.output().to_vec();
        let mut grads = net.zero_grads();
        let dx = net.backward(&tape, &d_y, &mut grads, true).unwrap().unwrap();
        assert_eq!(dx, x.to_vec());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = SeededRng::new(1);
        let net = Network::mlp(&[4, 5, 3], true, &mut rng).unwrap();
        let tape = net.forward_tape(&[1.0, 2.0, -1.0, 0.5]).unwrap();
        let mut grads = net.zero_grads();
        let dx = net
            .backward(&tape, &[0.0; 3], &mut grads, true)
            .unwrap()
            .unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        let mut blocks = Vec::new();
        grads.push_blocks(&mut blocks);
        assert!(blocks.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn tape_from_other_network_is_rejected() {
        let mut rng = SeededRng::new(1);
        let a = Network::mlp(&[4, 5, 3], true, &mut rng).unwrap();
        let b = Network::mlp(&[4, 3], true, &mut rng).unwrap();
        let tape = b.forward_tape(&[1.0; 4]).unwrap();
        let mut grads = a.zero_grads();
        assert!(a.backward(&tape, &[1.0; 3], &mut grads, false).is_err());
    }

    #[test]
    fn relu_network_without_bias_is_positively_homogeneous() {
        let mut rng = SeededRng::new(9);
        let net = Network::mlp(&[6, 8, 8, 4], false, &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.gaussian()).collect();
        let y = net.forward(&x).unwrap();
        for alpha in [0.1, 2.5, 17.0] {
            let xs: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let ys = net.forward(&xs).unwrap();
            for (a, b) in ys.iter().zip(&y) {
                assert!((a - alpha * b).abs() < 1e-12 * (1.0 + alpha));
            }
        }
    }

    #[test]
    fn adjacent_dims_must_chain() {
        let mut rng = SeededRng::new(1);
        let l1 = DenseLayer::new(3, 4, Activation::Relu, true, &mut rng);
        let l2 = DenseLayer::new(5, 2, Activation::Identity, true, &mut rng);
        assert!(Network::from_layers(vec![l1, l2]).is_err());
    }
}

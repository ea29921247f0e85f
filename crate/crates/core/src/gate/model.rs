// SPDX-License-Identifier: Apache-2.0
//! Attention auto-encoder: three encoding layers down to a scalar node
//! representation, three decoding layers back up to the node features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{backward_layer, forward_layer, sigmoid, Activation, AttentionLayer, LayerCache, Neighborhoods};
use super::matrix::Matrix;
use crate::graph::{CircuitGraph, PathStructure, FEATURE_WIDTH};
use crate::{Error, Result, Scalar};

/// Layer widths. The default is `[17→64], [64→64], [64→1]` for the encoder
/// mirrored by `[1→64], [64→64], [64→17]` for the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub feature_width: usize,
    pub hidden: usize,
    pub embedding: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            feature_width: FEATURE_WIDTH,
            hidden: 64,
            embedding: 1,
        }
    }
}

impl ModelShape {
    pub fn encoder_dims(&self) -> [(usize, usize); 3] {
        [
            (self.feature_width, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.embedding),
        ]
    }

    pub fn decoder_dims(&self) -> [(usize, usize); 3] {
        [
            (self.embedding, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.feature_width),
        ]
    }
}

/// All trainable tensors; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub encoder: Vec<AttentionLayer<T>>,
    pub decoder: Vec<AttentionLayer<T>>,
}

impl<T: Scalar> Parameters<T> {
    pub fn zeros(shape: ModelShape, heads: usize) -> Self {
        Parameters {
            encoder: shape.encoder_dims().iter().map(|&(i, o)| AttentionLayer::zeros(i, o, heads)).collect(),
            decoder: shape.decoder_dims().iter().map(|&(i, o)| AttentionLayer::zeros(i, o, heads)).collect(),
        }
    }

    pub fn random(shape: ModelShape, heads: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Parameters {
            encoder: shape
                .encoder_dims()
                .iter()
                .map(|&(i, o)| AttentionLayer::random(i, o, heads, &mut rng))
                .collect(),
            decoder: shape
                .decoder_dims()
                .iter()
                .map(|&(i, o)| AttentionLayer::random(i, o, heads, &mut rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &AttentionLayer<T>| AttentionLayer::zeros(l.d_in(), l.d_out(), l.heads.len());
        Parameters {
            encoder: self.encoder.iter().map(z).collect(),
            decoder: self.decoder.iter().map(z).collect(),
        }
    }

    /// Every tensor in a fixed order: encoder then decoder layers, heads,
    /// then `W`, `v_s`, `v_r`.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| l.heads.iter())
            .flat_map(|h| h.tensors())
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.heads.iter_mut())
            .flat_map(|h| h.tensors_mut())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn copy_from_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.len()
            )));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[at..at + t.len()]);
            at += t.len();
        }
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| {
                let v = x.to_f64_lossy();
                v * v
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Node features and attention neighborhoods of one register's fan-in cone.
/// Local node 0 is the register.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph<T> {
    pub features: Matrix<T>,
    pub neighbors: Neighborhoods,
}

impl<T: Scalar> Subgraph<T> {
    pub fn new(features: Matrix<T>, edges: &[(usize, usize)]) -> Result<Self> {
        let neighbors = Neighborhoods::from_edges(features.rows(), edges)?;
        if features.rows() == 0 {
            return Err(Error::Shape("empty subgraph".into()));
        }
        Ok(Subgraph { features, neighbors })
    }

    /// Local ids follow `ps.induced_nodes()`; features are the global ones.
    pub fn from_path_structure(graph: &CircuitGraph, ps: &PathStructure) -> Result<Self> {
        let nodes = ps.induced_nodes();
        let mut local = std::collections::HashMap::with_capacity(nodes.len());
        let mut data = Vec::with_capacity(nodes.len() * FEATURE_WIDTH);
        for (i, &g) in nodes.iter().enumerate() {
            local.insert(g, i);
            graph.node_feature::<T>(g)?.write_into(&mut data);
        }
        let edges: Vec<(usize, usize)> = ps
            .induced_edges(graph)
            .into_iter()
            .map(|(s, d)| (local[&s], local[&d]))
            .collect();
        Self::new(Matrix::from_vec(nodes.len(), FEATURE_WIDTH, data)?, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }
}

/// `h^(0) .. h^(3)`: input features followed by each encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRepresentations<T> {
    pub layers: Vec<Matrix<T>>,
}

impl<T: Scalar> NodeRepresentations<T> {
    pub fn last(&self) -> &Matrix<T> {
        self.layers.last().expect("at least the input layer")
    }
}

/// Scalar summary of one register: the root row of the last encoder output.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterEmbedding<T> {
    pub value: T,
}

impl<T: Scalar> RegisterEmbedding<T> {
    pub fn new(value: T) -> Self {
        RegisterEmbedding { value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateModel<T> {
    pub shape: ModelShape,
    pub heads: usize,
    /// Activation of the hidden layers.
    pub activation: Activation,
    /// Activation of the last encoder and the last decoder layer.
    pub output_activation: Activation,
    /// Seed the parameters were initialized from.
    pub seed: u64,
    pub params: Parameters<T>,
}

/// Loss terms of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub structure: f64,
}

pub(crate) struct ForwardPass<T> {
    encoder: Vec<LayerCache<T>>,
    decoder: Vec<LayerCache<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    fn embedding(&self) -> &Matrix<T> {
        &self.encoder.last().expect("encoder layers").output
    }

    fn reconstruction(&self) -> &Matrix<T> {
        &self.decoder.last().expect("decoder layers").output
    }
}

impl<T: Scalar> GateModel<T> {
    pub fn new(shape: ModelShape, heads: usize, activation: Activation, seed: u64) -> Result<Self> {
        if heads == 0 {
            return Err(Error::InvalidArgument("at least one attention head is required".into()));
        }
        if shape.feature_width == 0 || shape.hidden == 0 || shape.embedding == 0 {
            return Err(Error::InvalidArgument(format!("degenerate model shape {shape:?}")));
        }
        Ok(GateModel {
            shape,
            heads,
            activation,
            output_activation: activation,
            seed,
            params: Parameters::random(shape, heads, seed),
        })
    }

    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    fn layer_activation(&self, k: usize, count: usize) -> Activation {
        if k + 1 == count {
            self.output_activation
        } else {
            self.activation
        }
    }

    fn check_features(&self, sg: &Subgraph<T>) -> Result<()> {
        if sg.features.cols() != self.shape.feature_width {
            return Err(Error::Shape(format!(
                "feature width {} but the model expects {}",
                sg.features.cols(),
                self.shape.feature_width
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, sg: &Subgraph<T>) -> Result<ForwardPass<T>> {
        self.check_features(sg)?;
        let mut encoder: Vec<LayerCache<T>> = Vec::with_capacity(3);
        let (ne, nd) = (self.params.encoder.len(), self.params.decoder.len());
        for (k, layer) in self.params.encoder.iter().enumerate() {
            let input = encoder.last().map_or(&sg.features, |c| &c.output);
            let cache = forward_layer(layer, self.layer_activation(k, ne), input, &sg.neighbors)?;
            encoder.push(cache);
        }
        let mut decoder: Vec<LayerCache<T>> = Vec::with_capacity(3);
        for (k, layer) in self.params.decoder.iter().enumerate() {
            let input = decoder
                .last()
                .map_or(&encoder.last().expect("encoder").output, |c| &c.output);
            let cache = forward_layer(layer, self.layer_activation(k, nd), input, &sg.neighbors)?;
            decoder.push(cache);
        }
        Ok(ForwardPass { encoder, decoder })
    }

    /// Runs the encoder and returns every intermediate representation.
    pub fn encode(&self, sg: &Subgraph<T>) -> Result<NodeRepresentations<T>> {
        self.check_features(sg)?;
        let mut layers = vec![sg.features.clone()];
        let ne = self.params.encoder.len();
        for (k, layer) in self.params.encoder.iter().enumerate() {
            let act = self.layer_activation(k, ne);
            let next = forward_layer(layer, act, layers.last().expect("input"), &sg.neighbors)?;
            layers.push(next.output);
        }
        Ok(NodeRepresentations { layers })
    }

    /// Reconstructs node features from the final node representations.
    pub fn decode(&self, h_final: &Matrix<T>, neighbors: &Neighborhoods) -> Result<Matrix<T>> {
        if h_final.cols() != self.shape.embedding {
            return Err(Error::Shape(format!(
                "representation width {} but the decoder expects {}",
                h_final.cols(),
                self.shape.embedding
            )));
        }
        let mut h = h_final.clone();
        let nd = self.params.decoder.len();
        for (k, layer) in self.params.decoder.iter().enumerate() {
            h = forward_layer(layer, self.layer_activation(k, nd), &h, neighbors)?.output;
        }
        Ok(h)
    }

    pub fn embed_register(&self, sg: &Subgraph<T>) -> Result<RegisterEmbedding<T>> {
        let reps = self.encode(sg)?;
        Ok(RegisterEmbedding::new(reps.last().get(0, 0)))
    }

    pub fn loss(&self, sg: &Subgraph<T>, structure_weight: f64) -> Result<LossBreakdown> {
        let pass = self.forward(sg)?;
        Ok(loss_terms(sg, &pass, structure_weight))
    }

    /// Loss and exact gradients of every parameter.
    pub fn loss_and_gradients(
        &self,
        sg: &Subgraph<T>,
        structure_weight: f64,
    ) -> Result<(LossBreakdown, Parameters<T>)> {
        let pass = self.forward(sg)?;
        let loss = loss_terms(sg, &pass, structure_weight);
        let mut grads = self.params.zeros_like();
        self.backward_into(sg, &pass, structure_weight, &mut grads);
        Ok((loss, grads))
    }

    pub(crate) fn backward_into(
        &self,
        sg: &Subgraph<T>,
        pass: &ForwardPass<T>,
        structure_weight: f64,
        grads: &mut Parameters<T>,
    ) {
        let recon = pass.reconstruction();
        let scale = T::from_f64_lossy(2.0 / recon.as_slice().len() as f64);
        let mut d = Matrix::zeros(recon.rows(), recon.cols());
        for ((g, &xh), &x) in d
            .as_mut_slice()
            .iter_mut()
            .zip(recon.as_slice())
            .zip(sg.features.as_slice())
        {
            *g = scale * (xh - x);
        }

        for k in (0..self.params.decoder.len()).rev() {
            let input = if k == 0 {
                pass.embedding()
            } else {
                &pass.decoder[k - 1].output
            };
            d = backward_layer(
                &self.params.decoder[k],
                self.layer_activation(k, self.params.decoder.len()),
                input,
                &pass.decoder[k],
                &sg.neighbors,
                &d,
                &mut grads.decoder[k],
                true,
            )
            .expect("input gradient requested");
        }

        if structure_weight != 0.0 {
            add_structure_gradient(pass.embedding(), &sg.neighbors, structure_weight, &mut d);
        }

        for k in (0..self.params.encoder.len()).rev() {
            let input = if k == 0 {
                &sg.features
            } else {
                &pass.encoder[k - 1].output
            };
            let next = backward_layer(
                &self.params.encoder[k],
                self.layer_activation(k, self.params.encoder.len()),
                input,
                &pass.encoder[k],
                &sg.neighbors,
                &d,
                &mut grads.encoder[k],
                k > 0,
            );
            if let Some(n) = next {
                d = n;
            }
        }
    }
}

/// Mean squared feature reconstruction error over all entries.
pub fn reconstruction_loss<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape(format!(
            "{:?} features vs {:?} reconstruction",
            x.shape(),
            x_hat.shape()
        )));
    }
    let n = x.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| {
            let d = a.to_f64_lossy() - b.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(sum / n as f64)
}

/// Mean over in-edges `(j, i)` of `-ln sigmoid(h_i · h_j)`.
fn structure_loss<T: Scalar>(h: &Matrix<T>, nb: &Neighborhoods) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (j, i) in nb.edges() {
        let x: f64 = h
            .row(i)
            .iter()
            .zip(h.row(j))
            .map(|(a, b)| a.to_f64_lossy() * b.to_f64_lossy())
            .sum();
        // -ln σ(x) = ln(1 + e^{-x})
        total += if x > 0.0 { (-x).exp().ln_1p() } else { -x + x.exp().ln_1p() };
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn add_structure_gradient<T: Scalar>(h: &Matrix<T>, nb: &Neighborhoods, weight: f64, d: &mut Matrix<T>) {
    let count = nb.edges().count();
    if count == 0 {
        return;
    }
    let scale = T::from_f64_lossy(weight / count as f64);
    for (j, i) in nb.edges() {
        let x: T = h.row(i).iter().zip(h.row(j)).map(|(a, b)| *a * *b).sum();
        // d/dx [-ln σ(x)] = σ(x) - 1
        let g = (sigmoid(x) - T::one()) * scale;
        for c in 0..h.cols() {
            let (hi, hj) = (h.get(i, c), h.get(j, c));
            d.set(i, c, d.get(i, c) + g * hj);
            d.set(j, c, d.get(j, c) + g * hi);
        }
    }
}

fn loss_terms<T: Scalar>(sg: &Subgraph<T>, pass: &ForwardPass<T>, structure_weight: f64) -> LossBreakdown {
    let reconstruction =
        reconstruction_loss(&sg.features, pass.reconstruction()).expect("decoder output matches features");
    let structure = if structure_weight != 0.0 {
        structure_loss(pass.embedding(), &sg.neighbors)
    } else {
        0.0
    };
    LossBreakdown {
        total: reconstruction + structure_weight * structure,
        reconstruction,
        structure,
    }
}

// SPDX-License-Identifier: Apache-2.0
//! One multi-head graph attention layer.
//!
//! For a head with parameters `W`, `v_s`, `v_r` and neighborhoods `N_i`:
//!
//! ```text
//! a_j   = act(W h_j)
//! e_ij  = sigmoid(v_s . a_i + v_r . a_j)
//! α_ij  = exp(e_ij) / Σ_{l ∈ N_i} exp(e_il)
//! out_i = Σ_{j ∈ N_i} α_ij a_j
//! ```
//!
//! Head outputs are averaged, so the layer width is the head width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    LeakyRelu,
    Elu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu => {
                if z > T::zero() {
                    z
                } else {
                    z * T::from_f64_lossy(0.01)
                }
            }
            Activation::Elu => {
                if z > T::zero() {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::from_f64_lossy(0.01)
                }
            }
            Activation::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Elu => "elu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Activation::Relu,
            Activation::LeakyRelu,
            Activation::Elu,
            Activation::Tanh,
            Activation::Identity,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown activation `{s}`")))
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Attention neighborhoods in compressed row form. `N_i` always starts with
/// `i` itself, followed by its in-neighbors in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Neighborhoods {
    /// Builds `N_i = {i} ∪ {j : (j, i) ∈ edges}`.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut incoming = vec![Vec::new(); node_count];
        for &(s, d) in edges {
            if s >= node_count || d >= node_count {
                return Err(Error::Shape(format!(
                    "edge ({s}, {d}) outside a {node_count}-node graph"
                )));
            }
            if s != d {
                incoming[d].push(s);
            }
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut indices = Vec::with_capacity(node_count + edges.len());
        offsets.push(0);
        for (i, mut inc) in incoming.into_iter().enumerate() {
            inc.sort_unstable();
            inc.dedup();
            indices.push(i);
            indices.extend(inc);
            offsets.push(indices.len());
        }
        Ok(Neighborhoods { offsets, indices })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of (i, j) attention pairs, self-loops included.
    pub fn pair_count(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn span(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// In-neighbor edges `(j, i)` excluding self-loops.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| self.of(i)[1..].iter().map(move |&j| (j, i)))
    }
}

/// Parameters of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// `d_out x d_in`
    pub w: Matrix<T>,
    pub v_self: Vec<T>,
    pub v_neighbor: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        LayerParams {
            w: Matrix::zeros(d_out, d_in),
            v_self: vec![T::zero(); d_out],
            v_neighbor: vec![T::zero(); d_out],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, per tensor.
    pub fn random(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(d_in, d_out);
        let w_bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let v_bound = (6.0 / (d_out + 1) as f64).sqrt();
        for x in p.w.as_mut_slice() {
            *x = T::from_f64_lossy(rng.gen_range(-w_bound..w_bound));
        }
        for x in p.v_self.iter_mut().chain(p.v_neighbor.iter_mut()) {
            *x = T::from_f64_lossy(rng.gen_range(-v_bound..v_bound));
        }
        p
    }

    pub fn d_in(&self) -> usize {
        self.w.cols()
    }

    pub fn d_out(&self) -> usize {
        self.w.rows()
    }

    pub fn tensors(&self) -> [&[T]; 3] {
        [self.w.as_slice(), &self.v_self, &self.v_neighbor]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 3] {
        [self.w.as_mut_slice(), &mut self.v_self, &mut self.v_neighbor]
    }
}

/// `H` heads sharing input and output widths.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer<T> {
    pub heads: Vec<LayerParams<T>>,
}

impl<T: Scalar> AttentionLayer<T> {
    pub fn zeros(d_in: usize, d_out: usize, heads: usize) -> Self {
        AttentionLayer {
            heads: (0..heads).map(|_| LayerParams::zeros(d_in, d_out)).collect(),
        }
    }

    pub fn random(d_in: usize, d_out: usize, heads: usize, rng: &mut impl Rng) -> Self {
        AttentionLayer {
            heads: (0..heads).map(|_| LayerParams::random(d_in, d_out, rng)).collect(),
        }
    }

    pub fn d_in(&self) -> usize {
        self.heads[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.heads[0].d_out()
    }
}

/// Intermediate values of one head, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct HeadCache<T> {
    z: Matrix<T>,
    a: Matrix<T>,
    e: Vec<T>,
    alpha: Vec<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    pub(crate) heads: Vec<HeadCache<T>>,
    pub(crate) output: Matrix<T>,
}

fn check_input<T: Scalar>(head: &LayerParams<T>, h: &Matrix<T>, nb: &Neighborhoods) -> Result<()> {
    if h.cols() != head.d_in() {
        return Err(Error::Shape(format!(
            "input width {} but layer expects {}",
            h.cols(),
            head.d_in()
        )));
    }
    if h.rows() != nb.node_count() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} nodes",
            h.rows(),
            nb.node_count()
        )));
    }
    Ok(())
}

/// `Z = H Wᵀ`, `A = act(Z)`.
fn project<T: Scalar>(head: &LayerParams<T>, act: Activation, h: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let n = h.rows();
    let d_out = head.d_out();
    let mut z = Matrix::zeros(n, d_out);
    for i in 0..n {
        let hi = h.row(i);
        let zi = z.row_mut(i);
        for (o, zio) in zi.iter_mut().enumerate() {
            *zio = dot(head.w.row(o), hi);
        }
    }
    let a = z.map(|x| act.apply(x));
    (z, a)
}

fn logits_from<T: Scalar>(head: &LayerParams<T>, a: &Matrix<T>, nb: &Neighborhoods) -> Vec<T> {
    let n = a.rows();
    let s: Vec<T> = (0..n).map(|i| dot(&head.v_self, a.row(i))).collect();
    let r: Vec<T> = (0..n).map(|j| dot(&head.v_neighbor, a.row(j))).collect();
    let mut e = Vec::with_capacity(nb.pair_count());
    for i in 0..n {
        for &j in nb.of(i) {
            e.push(sigmoid(s[i] + r[j]));
        }
    }
    e
}

/// Relevance coefficients `e_ij` for every pair in CSR order.
pub fn attention_logits<T: Scalar>(
    head: &LayerParams<T>,
    act: Activation,
    h_prev: &Matrix<T>,
    nb: &Neighborhoods,
) -> Result<Vec<T>> {
    check_input(head, h_prev, nb)?;
    let (_, a) = project(head, act, h_prev);
    Ok(logits_from(head, &a, nb))
}

/// Softmax of the logits over each neighborhood.
pub fn attention_weights<T: Scalar>(logits: &[T], nb: &Neighborhoods) -> Vec<T> {
    let mut alpha = vec![T::zero(); logits.len()];
    for i in 0..nb.node_count() {
        let span = nb.span(i);
        let max = logits[span.clone()]
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for k in span.clone() {
            let x = (logits[k] - max).exp();
            alpha[k] = x;
            total += x;
        }
        for x in &mut alpha[span] {
            *x /= total;
        }
    }
    alpha
}

pub(crate) fn forward_layer<T: Scalar>(
    layer: &AttentionLayer<T>,
    act: Activation,
    input: &Matrix<T>,
    nb: &Neighborhoods,
) -> Result<LayerCache<T>> {
    check_input(&layer.heads[0], input, nb)?;
    let n = input.rows();
    let d_out = layer.d_out();
    let inv_heads = T::one() / T::from_usize_lossy(layer.heads.len());
    let mut output = Matrix::zeros(n, d_out);
    let mut heads = Vec::with_capacity(layer.heads.len());
    for head in &layer.heads {
        let (z, a) = project(head, act, input);
        let e = logits_from(head, &a, nb);
        let alpha = attention_weights(&e, nb);
        for i in 0..n {
            let out = output.row_mut(i);
            for (k, &j) in nb.span(i).zip(nb.of(i)) {
                axpy(out, alpha[k] * inv_heads, a.row(j));
            }
        }
        heads.push(HeadCache { z, a, e, alpha });
    }
    Ok(LayerCache { heads, output })
}

/// One encoder (or decoder) layer: heads averaged.
pub fn encoder_layer<T: Scalar>(
    layer: &AttentionLayer<T>,
    act: Activation,
    h_prev: &Matrix<T>,
    nb: &Neighborhoods,
) -> Result<Matrix<T>> {
    forward_layer(layer, act, h_prev, nb).map(|c| c.output)
}

/// Accumulates parameter gradients into `grads` and returns the gradient
/// with respect to the layer input when `want_input` is set.
pub(crate) fn backward_layer<T: Scalar>(
    layer: &AttentionLayer<T>,
    act: Activation,
    input: &Matrix<T>,
    cache: &LayerCache<T>,
    nb: &Neighborhoods,
    d_output: &Matrix<T>,
    grads: &mut AttentionLayer<T>,
    want_input: bool,
) -> Option<Matrix<T>> {
    let n = input.rows();
    let d_out = layer.d_out();
    let inv_heads = T::one() / T::from_usize_lossy(layer.heads.len());
    let mut d_input = want_input.then(|| Matrix::zeros(n, layer.d_in()));
    let mut d_a = Matrix::zeros(n, d_out);
    let mut d_alpha = vec![T::zero(); nb.pair_count()];
    let mut d_s = vec![T::zero(); n];
    let mut d_r = vec![T::zero(); n];

    for ((head, hc), g) in layer.heads.iter().zip(&cache.heads).zip(grads.heads.iter_mut()) {
        d_a.fill_zero();
        d_s.iter_mut().for_each(|x| *x = T::zero());
        d_r.iter_mut().for_each(|x| *x = T::zero());

        // aggregation out_i = Σ α_ij a_j, with d_out_i = d_output_i / H
        for i in 0..n {
            let d_oi = d_output.row(i);
            for (k, &j) in nb.span(i).zip(nb.of(i)) {
                d_alpha[k] = dot(d_oi, hc.a.row(j)) * inv_heads;
                axpy(d_a.row_mut(j), hc.alpha[k] * inv_heads, d_oi);
            }
        }
        // softmax and sigmoid
        for i in 0..n {
            let span = nb.span(i);
            let weighted: T = span.clone().map(|k| hc.alpha[k] * d_alpha[k]).sum();
            for (k, &j) in span.zip(nb.of(i)) {
                let d_e = hc.alpha[k] * (d_alpha[k] - weighted);
                let d_u = d_e * hc.e[k] * (T::one() - hc.e[k]);
                d_s[i] += d_u;
                d_r[j] += d_u;
            }
        }
        for i in 0..n {
            let a_i = hc.a.row(i);
            axpy(&mut g.v_self, d_s[i], a_i);
            axpy(&mut g.v_neighbor, d_r[i], a_i);
            let da = d_a.row_mut(i);
            axpy(da, d_s[i], &head.v_self);
            axpy(da, d_r[i], &head.v_neighbor);
        }
        // through the activation and the projection
        for i in 0..n {
            let z_i = hc.z.row(i);
            let h_i = input.row(i);
            let da = d_a.row(i);
            for o in 0..d_out {
                let dz = da[o] * act.derivative(z_i[o]);
                if dz == T::zero() {
                    continue;
                }
                axpy(g.w.row_mut(o), dz, h_i);
                if let Some(d_in) = d_input.as_mut() {
                    axpy(d_in.row_mut(i), dz, head.w.row(o));
                }
            }
        }
    }
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_head(w: f64, vs: f64, vr: f64) -> LayerParams<f64> {
        LayerParams {
            w: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            v_self: vec![vs],
            v_neighbor: vec![vr],
        }
    }

    fn three_node() -> (Matrix<f64>, Neighborhoods) {
        // edges 1->0 and 2->0, 2->1
        let h = Matrix::from_vec(3, 1, vec![1.0, 2.0, 0.5]).unwrap();
        let nb = Neighborhoods::from_edges(3, &[(1, 0), (2, 0), (2, 1)]).unwrap();
        (h, nb)
    }

    #[test]
    fn neighborhoods_include_self_first() {
        let (_, nb) = three_node();
        assert_eq!(nb.of(0), &[0, 1, 2]);
        assert_eq!(nb.of(1), &[1, 2]);
        assert_eq!(nb.of(2), &[2]);
        assert_eq!(nb.pair_count(), 6);
        let nb = Neighborhoods::from_edges(2, &[(0, 0), (1, 0), (1, 0)]).unwrap();
        assert_eq!(nb.of(0), &[0, 1]);
    }

    #[test]
    fn zero_attention_vectors_give_half() {
        let (h, nb) = three_node();
        let e = attention_logits(&scalar_head(0.7, 0.0, 0.0), Activation::Relu, &h, &nb).unwrap();
        assert!(e.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn hand_computed_scalar_logits() {
        let (h, nb) = three_node();
        let (w, vs, vr) = (2.0, 0.3, -0.4);
        let e = attention_logits(&scalar_head(w, vs, vr), Activation::Relu, &h, &nb).unwrap();
        // a = relu(2 h) = [2, 4, 1]
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let want = [
            sig(0.3 * 2.0 - 0.4 * 2.0),
            sig(0.3 * 2.0 - 0.4 * 4.0),
            sig(0.3 * 2.0 - 0.4 * 1.0),
            sig(0.3 * 4.0 - 0.4 * 4.0),
            sig(0.3 * 4.0 - 0.4 * 1.0),
            sig(0.3 * 1.0 - 0.4 * 1.0),
        ];
        for (got, want) in e.iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert!(e.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn hand_computed_scalar_layer() {
        let (h, nb) = three_node();
        let head = scalar_head(2.0, 0.3, -0.4);
        let layer = AttentionLayer { heads: vec![head.clone()] };
        let out = encoder_layer(&layer, Activation::Relu, &h, &nb).unwrap();
        let e = attention_logits(&head, Activation::Relu, &h, &nb).unwrap();
        let a = [2.0, 4.0, 1.0];
        let n0: f64 = e[0].exp() + e[1].exp() + e[2].exp();
        let want0 = (e[0].exp() * a[0] + e[1].exp() * a[1] + e[2].exp() * a[2]) / n0;
        let n1: f64 = e[3].exp() + e[4].exp();
        let want1 = (e[3].exp() * a[1] + e[4].exp() * a[2]) / n1;
        assert!((out.get(0, 0) - want0).abs() < 1e-14);
        assert!((out.get(1, 0) - want1).abs() < 1e-14);
        assert!((out.get(2, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let nb = Neighborhoods::from_edges(1, &[]).unwrap();
        assert_eq!(attention_weights(&[0.3], &nb), vec![1.0]);
        let nb = Neighborhoods::from_edges(2, &[(1, 0)]).unwrap();
        let a = attention_weights(&[0.4, 0.4, 0.9], &nb);
        assert_eq!(&a[..2], &[0.5, 0.5]);
        let nb = Neighborhoods::from_edges(3, &[(1, 0), (2, 0)]).unwrap();
        let logits = [0.2, 0.9, 0.9, 0.1, 0.1];
        let a = attention_weights(&logits, &nb);
        let z = 0.2f64.exp() + 2.0 * 0.9f64.exp();
        assert!((a[0] - 0.2f64.exp() / z).abs() < 1e-15);
        assert!((a[1] - 0.9f64.exp() / z).abs() < 1e-15);
        assert!((a[0] + a[1] + a[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_passes_activation_through() {
        let nb = Neighborhoods::from_edges(1, &[]).unwrap();
        let h = Matrix::from_vec(1, 2, vec![0.5, 1.5]).unwrap();
        let mut head = LayerParams::<f64>::zeros(2, 2);
        head.w.set(0, 0, 1.0);
        head.w.set(1, 1, 1.0);
        head.v_self = vec![0.3, -0.2];
        let layer = AttentionLayer { heads: vec![head.clone(), head] };
        let out = encoder_layer(&layer, Activation::Relu, &h, &nb).unwrap();
        assert_eq!(out.row(0), &[0.5, 1.5]);
    }

    #[test]
    fn zero_input_zero_output() {
        let nb = Neighborhoods::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut rng = rand::thread_rng();
        let layer = AttentionLayer::<f64>::random(4, 5, 3, &mut rng);
        let out = encoder_layer(&layer, Activation::Relu, &Matrix::zeros(3, 4), &nb).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shape_errors() {
        let nb = Neighborhoods::from_edges(2, &[]).unwrap();
        let layer = AttentionLayer::<f64>::zeros(3, 4, 1);
        assert!(encoder_layer(&layer, Activation::Relu, &Matrix::zeros(2, 2), &nb).is_err());
        assert!(encoder_layer(&layer, Activation::Relu, &Matrix::zeros(3, 3), &nb).is_err());
        assert!(Neighborhoods::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::LeakyRelu, Activation::Elu, Activation::Tanh, Activation::Identity] {
            for z in [-1.3f64, -0.2, 0.4, 2.0] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-6, "{act:?} at {z}");
            }
        }
        assert_eq!(Activation::Relu.derivative(0.0f64), 0.0);
    }
}

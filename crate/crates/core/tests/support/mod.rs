// SPDX-License-Identifier: Apache-2.0
//! Shared generators and reference oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use fsmreg::gate::{GateModel, Matrix, Subgraph};
use fsmreg::graph::FEATURE_WIDTH;
use fsmreg::{CellKind, CircuitGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NON_REGISTER_KINDS: [CellKind; 13] = [
    CellKind::Inv,
    CellKind::Buf,
    CellKind::And,
    CellKind::Or,
    CellKind::Nand,
    CellKind::Nor,
    CellKind::Xor,
    CellKind::Xnor,
    CellKind::Mux2,
    CellKind::InputPort,
    CellKind::OutputPort,
    CellKind::Const0,
    CellKind::Const1,
];

/// Random DAG: each node draws up to `max_fan_in` distinct predecessors
/// among lower ids. Node 0 is always a register.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize, max_fan_in: usize, register_prob: f64) -> CircuitGraph {
    let n = rng.gen_range(1..=max_nodes);
    let kinds: Vec<CellKind> = (0..n)
        .map(|i| {
            if i == 0 || rng.gen_bool(register_prob) {
                if rng.gen_bool(0.8) {
                    CellKind::Dff
                } else {
                    CellKind::Latch
                }
            } else {
                NON_REGISTER_KINDS[rng.gen_range(0..NON_REGISTER_KINDS.len())]
            }
        })
        .collect();
    let mut edges = Vec::new();
    for dst in 1..n {
        let k = rng.gen_range(0..=max_fan_in.min(dst));
        let mut preds = BTreeSet::new();
        while preds.len() < k {
            preds.insert(rng.gen_range(0..dst));
        }
        edges.extend(preds.into_iter().map(|src| (src, dst)));
    }
    CircuitGraph::from_edges(kinds, &edges).expect("valid random DAG")
}

/// Random directed graph that may contain cycles and self-loops.
pub fn random_cyclic(rng: &mut impl Rng, max_nodes: usize, max_fan_in: usize) -> CircuitGraph {
    let n = rng.gen_range(1..=max_nodes);
    let kinds: Vec<CellKind> = (0..n)
        .map(|i| {
            if i == 0 || rng.gen_bool(0.25) {
                CellKind::Dff
            } else {
                NON_REGISTER_KINDS[rng.gen_range(0..NON_REGISTER_KINDS.len())]
            }
        })
        .collect();
    let mut edges = BTreeSet::new();
    for dst in 0..n {
        for _ in 0..rng.gen_range(0..=max_fan_in) {
            edges.insert((rng.gen_range(0..n), dst));
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    CircuitGraph::from_edges(kinds, &edges).expect("valid random graph")
}

/// Result of the brute-force reference search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCone {
    /// Node to backward distance from the root, root at 0.
    pub depth: HashMap<usize, usize>,
    pub terminated_early: bool,
}

impl OracleCone {
    pub fn nodes(&self) -> BTreeSet<usize> {
        self.depth.keys().copied().collect()
    }

    /// Nodes grouped by distance, each group sorted.
    pub fn levels(&self) -> Vec<BTreeSet<usize>> {
        let max = self.depth.values().copied().max().unwrap_or(0);
        let mut out = vec![BTreeSet::new(); max + 1];
        for (&n, &d) in &self.depth {
            out[d].insert(n);
        }
        out
    }
}

fn enumerate_paths(
    graph: &CircuitGraph,
    node: usize,
    len: usize,
    limit: usize,
    best: &mut HashMap<usize, usize>,
) {
    let entry = best.entry(node).or_insert(usize::MAX);
    if len < *entry {
        *entry = len;
    }
    if len == limit {
        return;
    }
    for &p in graph.predecessors(node) {
        enumerate_paths(graph, p, len + 1, limit, best);
    }
}

/// Enumerates every backward walk of at most `walk_length` edges from the
/// root, keeps the shortest distance per node, then cuts at the first level
/// whose parents touch a register or the root.
pub fn oracle_cone(graph: &CircuitGraph, root: usize, walk_length: usize) -> OracleCone {
    let mut dist = HashMap::new();
    enumerate_paths(graph, root, 0, walk_length, &mut dist);

    let mut stop: Option<usize> = None;
    for (&u, &d) in &dist {
        if d >= walk_length {
            continue;
        }
        let hits = graph
            .predecessors(u)
            .iter()
            .any(|&p| p == root || graph.is_register(p));
        if hits {
            stop = Some(stop.map_or(d + 1, |s: usize| s.min(d + 1)));
        }
    }
    let cut = stop.unwrap_or(walk_length);
    dist.retain(|_, d| *d <= cut);
    OracleCone {
        depth: dist,
        terminated_early: stop.is_some(),
    }
}

/// Random subgraph with feature rows shaped like real node features.
pub fn random_subgraph(rng: &mut impl Rng, nodes: usize) -> Subgraph<f64> {
    let mut edges = BTreeSet::new();
    for dst in 0..nodes {
        for _ in 0..rng.gen_range(0..=3usize) {
            let src = rng.gen_range(0..nodes);
            if src != dst {
                edges.insert((src, dst));
            }
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    let mut data = Vec::with_capacity(nodes * FEATURE_WIDTH);
    for i in 0..nodes {
        let kind = if i == 0 {
            CellKind::Dff
        } else {
            CellKind::ALL[rng.gen_range(0..CellKind::COUNT)]
        };
        let mut row = vec![0.0; FEATURE_WIDTH];
        row[kind.index()] = 1.0;
        row[CellKind::COUNT] = edges.iter().filter(|e| e.1 == i).count() as f64;
        row[CellKind::COUNT + 1] = edges.iter().filter(|e| e.0 == i).count() as f64 + rng.gen_range(0.0..1.0);
        data.extend(row);
    }
    Subgraph::new(Matrix::from_vec(nodes, FEATURE_WIDTH, data).unwrap(), &edges).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of comparing analytic and numeric gradients on one subgraph.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub entries: usize,
    pub mismatches: Vec<String>,
    /// Entries whose one-sided differences disagree, a kink inside the step.
    pub kinks: usize,
}

/// Central finite differences over every parameter entry.
pub fn gradient_check(
    model: &GateModel<f64>,
    sg: &Subgraph<f64>,
    structure_weight: f64,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> GradCheck {
    let (base, grads) = model.loss_and_gradients(sg, structure_weight).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = model.clone();
    let mut out = GradCheck::default();
    for (ti, tensor) in analytic.iter().enumerate() {
        for (k, &a) in tensor.iter().enumerate() {
            let orig = probe.params.tensors_mut()[ti][k];
            probe.params.tensors_mut()[ti][k] = orig + step;
            let plus = probe.loss(sg, structure_weight).unwrap().total;
            probe.params.tensors_mut()[ti][k] = orig - step;
            let minus = probe.loss(sg, structure_weight).unwrap().total;
            probe.params.tensors_mut()[ti][k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            out.entries += 1;
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            if diff <= abs_floor || diff <= rel_tol * scale {
                continue;
            }
            // On a smooth loss the one-sided slopes differ by about
            // step * |f''|; a wider gap means an activation kink lies
            // inside the step and the central difference is meaningless.
            let fwd = (plus - base.total) / step;
            let bwd = (base.total - minus) / step;
            if (fwd - bwd).abs() >= diff {
                out.kinks += 1;
            } else {
                out.mismatches
                    .push(format!("tensor {ti} entry {k}: analytic {a:e} numeric {numeric:e}"));
            }
        }
    }
    out
}

/// Numerator and denominator, `None` when the denominator is zero.
pub type Fraction = Option<(u64, u64)>;

/// Recall, precision and accuracy from predicted and actual label lists,
/// computed as exact fractions.
pub fn tally(pairs: &[(bool, bool)]) -> (Fraction, Fraction, Fraction) {
    let tp = pairs.iter().filter(|&&(p, a)| p && a).count() as u64;
    let pred_pos = pairs.iter().filter(|&&(p, _)| p).count() as u64;
    let act_pos = pairs.iter().filter(|&&(_, a)| a).count() as u64;
    let correct = pairs.iter().filter(|&&(p, a)| p == a).count() as u64;
    let frac = |n: u64, d: u64| (d > 0).then_some((n, d));
    (frac(tp, act_pos), frac(tp, pred_pos), frac(correct, pairs.len() as u64))
}

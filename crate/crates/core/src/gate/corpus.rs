// SPDX-License-Identifier: Apache-2.0
//! Training corpora and structural deduplication.
//!
//! Two path structures whose nodes receive identical colors under
//! in-neighbor color refinement are indistinguishable to the attention
//! layers: every node sees the same multiset of inputs at every depth, so
//! the forward pass, the loss and the gradients coincide. Such structures
//! are collapsed into a single sample with a multiplicity.

use std::collections::HashMap;

use super::model::Subgraph;
use crate::Scalar;

/// Refinement rounds; covers the three encoder plus three decoder layers.
const ROUNDS: usize = 8;

#[inline]
fn mix(h: u64, v: u64) -> u64 {
    // splitmix64 finalizer over a running combination
    let mut z = h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Isomorphism-invariant key of a subgraph with a distinguished root.
pub fn structure_key<T: Scalar>(sg: &Subgraph<T>) -> u64 {
    let n = sg.node_count();
    let mut colors: Vec<u64> = (0..n)
        .map(|i| {
            let mut h = mix(0, (i == 0) as u64);
            for x in sg.features.row(i) {
                h = mix(h, x.to_f64_lossy().to_bits());
            }
            h
        })
        .collect();
    let mut scratch = Vec::new();
    for _ in 0..ROUNDS {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                scratch.clear();
                scratch.extend(sg.neighbors.of(i)[1..].iter().map(|&j| colors[j]));
                scratch.sort_unstable();
                scratch.iter().fold(mix(colors[i], scratch.len() as u64), |h, &c| mix(h, c))
            })
            .collect();
        colors = next;
    }
    let root = colors[0];
    colors.sort_unstable();
    colors.iter().fold(mix(root, n as u64), |h, &c| mix(h, c))
}

/// Subgraphs grouped by structure key, in first-seen order.
#[derive(Debug, Clone)]
pub struct Corpus<T> {
    pub samples: Vec<Subgraph<T>>,
    pub keys: Vec<u64>,
    /// Number of input structures represented by each sample.
    pub counts: Vec<usize>,
}

impl<T: Scalar> Corpus<T> {
    pub fn new(subgraphs: impl IntoIterator<Item = Subgraph<T>>, dedup: bool) -> Self {
        let mut samples = Vec::new();
        let mut keys = Vec::new();
        let mut counts = Vec::new();
        let mut index: HashMap<u64, usize> = HashMap::new();
        for sg in subgraphs {
            let key = structure_key(&sg);
            if dedup {
                if let Some(&at) = index.get(&key) {
                    counts[at] += 1;
                    continue;
                }
                index.insert(key, samples.len());
            }
            samples.push(sg);
            keys.push(key);
            counts.push(1);
        }
        Corpus { samples, keys, counts }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_structures(&self) -> usize {
        self.counts.iter().sum()
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Closed-form work bounds for extraction and the attention model.

use serde::{Deserialize, Serialize};

use crate::graph::CircuitGraph;

/// Fan-in assumed by the bounds.
pub const BOUND_FAN_IN: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfBounds {
    pub registers: usize,
    pub mf1: u128,
    pub mf2: u128,
}

/// `sum_{i=1}^{walk_length-1} 4^i`: the extraction term of one register.
pub fn mf1_per_register(walk_length: usize) -> u128 {
    (1..walk_length).map(|i| BOUND_FAN_IN.pow(i as u32)).sum()
}

/// MF1 and MF2 for `graph` with feature widths `f_in` and `f_out`.
pub fn mf_bounds(graph: &CircuitGraph, walk_length: usize, f_in: usize, f_out: usize) -> MfBounds {
    let r = graph.registers().len();
    let per = mf1_per_register(walk_length);
    let (f, fp) = (f_in as u128, f_out as u128);
    MfBounds {
        registers: r,
        mf1: per * r as u128,
        mf2: (per * f * fp + per * fp) * r as u128,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::CellKind;

    fn registers(n: usize) -> CircuitGraph {
        CircuitGraph::from_edges(vec![CellKind::Dff; n], &[]).unwrap()
    }

    #[test]
    fn small_cases() {
        assert_eq!(mf_bounds(&registers(1), 2, 17, 64).mf1, 4);
        assert_eq!(mf_bounds(&registers(10), 6, 17, 64).mf1, 13640);
        assert_eq!(mf1_per_register(6), 1364);
        assert_eq!(mf1_per_register(1), 0);
        let b = mf_bounds(&registers(2), 3, 2, 3);
        // (20*2*3 + 20*3) * 2
        assert_eq!(b.mf2, 360);
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Backward breadth-first extraction of register fan-in cones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CircuitGraph;
use crate::{Error, Result};

pub const DEFAULT_WALK_LENGTH: usize = 6;

/// Fan-in cone of one register, grouped by backward distance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStructure {
    pub root: usize,
    /// `levels[0] == [root]`; each node appears once, at its minimum depth.
    pub levels: Vec<Vec<usize>>,
    /// Set when the search stopped because it reached a register (or
    /// came back to the root) before exhausting the walk length.
    pub terminated_early: bool,
}

impl PathStructure {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Nodes in level order, root first.
    pub fn induced_nodes(&self) -> Vec<usize> {
        self.levels.iter().flatten().copied().collect()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Every graph edge with both endpoints inside the structure.
    pub fn induced_edges(&self, graph: &CircuitGraph) -> Vec<(usize, usize)> {
        let nodes = self.induced_nodes();
        let mut inside = nodes.clone();
        inside.sort_unstable();
        let mut edges = Vec::new();
        for &d in &nodes {
            for &s in graph.predecessors(d) {
                if inside.binary_search(&s).is_ok() {
                    edges.push((s, d));
                }
            }
        }
        edges
    }
}

/// Level-by-level backward search from `start`.
///
/// After a level is expanded, the search stops if any predecessor seen at
/// that level was a register or the start node itself; the level that
/// triggered the stop is kept.
pub fn extract_path_structure(
    graph: &CircuitGraph,
    start: usize,
    walk_length: usize,
) -> Result<PathStructure> {
    if !graph.contains(start) {
        return Err(Error::UnknownNode(start));
    }
    if !graph.is_register(start) {
        return Err(Error::NotARegister(start));
    }
    if walk_length == 0 {
        return Err(Error::InvalidArgument("walk_length must be at least 1".into()));
    }
    let mut visited = vec![false; graph.node_count()];
    visited[start] = true;
    let mut levels = vec![vec![start]];
    let mut terminated_early = false;

    for _ in 0..walk_length {
        let frontier = levels.last().expect("root level");
        let mut next = Vec::new();
        let mut quit = false;
        for &node in frontier {
            for &pre in graph.predecessors(node) {
                if pre == start || graph.is_register(pre) {
                    quit = true;
                }
                if !visited[pre] {
                    visited[pre] = true;
                    next.push(pre);
                }
            }
        }
        let exhausted = next.is_empty();
        if !exhausted {
            levels.push(next);
        }
        if quit {
            terminated_early = true;
            break;
        }
        if exhausted {
            break;
        }
    }
    Ok(PathStructure {
        root: start,
        levels,
        terminated_early,
    })
}

/// One structure per register, keyed by node id.
pub fn extract_all(graph: &CircuitGraph, walk_length: usize) -> Result<BTreeMap<usize, PathStructure>> {
    graph
        .registers()
        .into_iter()
        .map(|r| extract_path_structure(graph, r, walk_length).map(|p| (r, p)))
        .collect()
}

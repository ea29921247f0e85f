// SPDX-License-Identifier: Apache-2.0
//! Directed data-dependency graph over mapped cells.

mod path;

use crate::netlist::{CellKind, Netlist};
use crate::{Error, Result, Scalar};

pub use path::{extract_all, extract_path_structure, PathStructure, DEFAULT_WALK_LENGTH};

/// Width of a node feature vector: one-hot cell kind, in-degree, out-degree.
pub const FEATURE_WIDTH: usize = CellKind::COUNT + 2;

/// Per-node feature: one-hot cell kind followed by raw in/out degree counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    pub one_hot: [T; CellKind::COUNT],
    pub in_degree: T,
    pub out_degree: T,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(kind: CellKind, in_degree: usize, out_degree: usize) -> Self {
        let mut one_hot = [T::zero(); CellKind::COUNT];
        one_hot[kind.index()] = T::one();
        FeatureVector {
            one_hot,
            in_degree: T::from_usize_lossy(in_degree),
            out_degree: T::from_usize_lossy(out_degree),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(FEATURE_WIDTH);
        self.write_into(&mut v);
        v
    }

    pub fn write_into(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.one_hot);
        out.push(self.in_degree);
        out.push(self.out_degree);
    }
}

/// `G = (V, E, F)` with `e_ij = 1` iff cell `i` drives a data input of cell `j`.
///
/// Predecessor and successor lists are sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitGraph {
    kinds: Vec<CellKind>,
    names: Vec<String>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl CircuitGraph {
    /// Builds the graph from explicit edges `(src, dst)`. Duplicate edges
    /// collapse into one.
    pub fn from_edges(kinds: Vec<CellKind>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = kinds.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(s, d) in edges {
            if s >= n {
                return Err(Error::UnknownNode(s));
            }
            if d >= n {
                return Err(Error::UnknownNode(d));
            }
            preds[d].push(s);
            succs[s].push(d);
        }
        for l in preds.iter_mut().chain(succs.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        let names = (0..n).map(|i| format!("n{i}")).collect();
        Ok(CircuitGraph {
            kinds,
            names,
            preds,
            succs,
        })
    }

    pub fn from_netlist(netlist: &Netlist) -> Self {
        let drivers = netlist.drivers();
        let mut edges = Vec::new();
        for c in &netlist.cells {
            for &net in &c.inputs {
                if let Some(src) = drivers[net] {
                    edges.push((src, c.id));
                }
            }
        }
        let kinds = netlist.cells.iter().map(|c| c.kind).collect();
        let mut g = Self::from_edges(kinds, &edges).expect("netlist cell ids are dense");
        g.names = netlist.cells.iter().map(|c| c.name.clone()).collect();
        g
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.kinds.len() {
            return Err(Error::Shape(format!(
                "{} names for {} nodes",
                names.len(),
                self.kinds.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.preds.iter().map(Vec::len).sum()
    }

    pub fn kind(&self, node: usize) -> CellKind {
        self.kinds[node]
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn is_register(&self, node: usize) -> bool {
        self.kinds[node].is_register()
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn contains(&self, node: usize) -> bool {
        node < self.kinds.len()
    }

    /// All edges `(src, dst)` ordered by destination, then source.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.preds
            .iter()
            .enumerate()
            .flat_map(|(d, ps)| ps.iter().map(move |&s| (s, d)))
    }

    pub fn registers(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_register(i)).collect()
    }

    pub fn node_feature<T: Scalar>(&self, node: usize) -> Result<FeatureVector<T>> {
        if !self.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        Ok(FeatureVector::new(
            self.kinds[node],
            self.preds[node].len(),
            self.succs[node].len(),
        ))
    }
}

/// Convenience wrapper around [`CircuitGraph::from_netlist`].
pub fn build_graph(netlist: &Netlist) -> CircuitGraph {
    CircuitGraph::from_netlist(netlist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{load_netlist, TechLibrary};

    #[test]
    fn and_feeding_dff() {
        let g = CircuitGraph::from_edges(vec![CellKind::And, CellKind::Dff], &[(0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        let and = g.node_feature::<f64>(0).unwrap();
        let dff = g.node_feature::<f64>(1).unwrap();
        assert_eq!((and.in_degree, and.out_degree), (0.0, 1.0));
        assert_eq!((dff.in_degree, dff.out_degree), (1.0, 0.0));
    }

    #[test]
    fn dff_inverter_loop() {
        let lib = TechLibrary::builtin();
        let n = load_netlist(
            "module t(clk); input clk; wire d, q; \
             DFFRX1 r (.D(d), .CK(clk), .RN(clk), .Q(q)); INVX1 i (.A(q), .Y(d)); endmodule",
            &lib,
        )
        .unwrap();
        let g = build_graph(&n);
        let r = n.cells.iter().find(|c| c.name == "r").unwrap().id;
        let i = n.cells.iter().find(|c| c.name == "i").unwrap().id;
        let mut edges: Vec<_> = g.edges().collect();
        edges.sort();
        let mut want = vec![(r, i), (i, r)];
        want.sort();
        // the clock port drives only control pins, so it has no edges
        assert_eq!(edges, want);
        for node in [r, i] {
            let f = g.node_feature::<f32>(node).unwrap();
            assert_eq!((f.in_degree, f.out_degree), (1.0, 1.0));
        }
        assert_eq!(g.node_count(), n.cells.len());
    }

    #[test]
    fn features() {
        let g = CircuitGraph::from_edges(
            vec![
                CellKind::InputPort,
                CellKind::And,
                CellKind::Inv,
                CellKind::Inv,
                CellKind::Inv,
                CellKind::Buf,
                CellKind::Buf,
            ],
            &[(5, 1), (6, 1), (1, 2), (1, 3), (1, 4)],
        )
        .unwrap();
        let iso = g.node_feature::<f64>(0).unwrap();
        assert_eq!(iso.one_hot[CellKind::InputPort.index()], 1.0);
        assert_eq!((iso.in_degree, iso.out_degree), (0.0, 0.0));
        let and = g.node_feature::<f64>(1).unwrap();
        assert_eq!(and.one_hot[CellKind::And.index()], 1.0);
        assert_eq!((and.in_degree, and.out_degree), (2.0, 3.0));
        for node in 0..g.node_count() {
            let f = g.node_feature::<f64>(node).unwrap();
            assert_eq!(f.one_hot.iter().sum::<f64>(), 1.0);
            assert_eq!(f.to_vec().len(), FEATURE_WIDTH);
        }
        assert!(matches!(g.node_feature::<f64>(7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = CircuitGraph::from_edges(vec![CellKind::Buf, CellKind::And], &[(0, 1), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(CircuitGraph::from_edges(vec![CellKind::Buf], &[(0, 3)]).is_err());
    }

    #[test]
    fn empty_netlist_empty_graph() {
        let n = load_netlist("module m; endmodule", &TechLibrary::builtin()).unwrap();
        let g = build_graph(&n);
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
    }
}

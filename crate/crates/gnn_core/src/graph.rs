//! Graph containers consumed by the engine.

use serde::{Deserialize, Serialize};

use crate::{GnnError, Matrix, Result};

/// Regression target attached to a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// One row per node (node regression).
    PerNode(Matrix),
    /// One scalar for the whole graph (graph regression).
    Graph(f64),
}

/// A single input graph: node features, directed edges with features, and
/// a regression target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphData {
    pub node_features: Matrix,
    /// Directed edges (src, dst). Self-loops are added by the engine and
    /// must not be listed here.
    pub edges: Vec<(u32, u32)>,
    /// One row per edge, same order as `edges`.
    pub edge_features: Matrix,
    pub target: Target,
}

/// Engine-ready form: in-neighbor lists and normalized GCN adjacency are
/// precomputed once per graph.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub x: Matrix,
    pub edge_features: Matrix,
    /// Per destination node: (src, edge index). Self-loops are implicit.
    pub in_edges: Vec<Vec<(u32, u32)>>,
    /// Symmetric-normalized adjacency with self-loops, per destination:
    /// (src, weight).
    pub gcn_adj: Vec<Vec<(u32, f64)>>,
    pub target: Target,
}

impl PreparedGraph {
    pub fn new(g: &GraphData) -> Result<Self> {
        let n = g.node_features.rows();
        if n == 0 {
            return Err(GnnError::InvalidArgument("graph has no nodes".into()));
        }
        if g.edge_features.rows() != g.edges.len() {
            return Err(GnnError::InvalidArgument(format!(
                "edge feature rows {} != edge count {}",
                g.edge_features.rows(),
                g.edges.len()
            )));
        }
        if let Target::PerNode(t) = &g.target {
            if t.rows() != n {
                return Err(GnnError::InvalidArgument(format!(
                    "target rows {} != node count {n}",
                    t.rows()
                )));
            }
        }
        let mut in_edges = vec![Vec::new(); n];
        // degree counts self-loop, matching D of (A + I)
        let mut degree = vec![1.0f64; n];
        for (idx, &(src, dst)) in g.edges.iter().enumerate() {
            let (s, d) = (src as usize, dst as usize);
            if s >= n || d >= n {
                return Err(GnnError::InvalidArgument(format!(
                    "edge ({src},{dst}) out of range for {n} nodes"
                )));
            }
            in_edges[d].push((src, idx as u32));
            degree[d] += 1.0;
        }
        let mut gcn_adj = vec![Vec::new(); n];
        for i in 0..n {
            let dinv = 1.0 / degree[i].sqrt();
            gcn_adj[i].push((i as u32, dinv * dinv)); // self-loop
            for &(src, _) in &in_edges[i] {
                let w = dinv / degree[src as usize].sqrt();
                gcn_adj[i].push((src, w));
            }
        }
        Ok(Self {
            x: g.node_features.clone(),
            edge_features: g.edge_features.clone(),
            in_edges,
            gcn_adj,
            target: g.target.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }
}

/// Sum in a canonical (value-sorted) order. The result depends only on the
/// multiset of addends, so aggregations built on it are invariant to input
/// permutation down to the last bit.
pub fn stable_sum(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(f64::total_cmp);
    let mut acc = 0.0;
    for &v in buf.iter() {
        acc += v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_graph() -> GraphData {
        // path 0 - 1 - 2, both directions
        GraphData {
            node_features: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])
                .unwrap(),
            edges: vec![(0, 1), (1, 0), (1, 2), (2, 1)],
            edge_features: Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]])
                .unwrap(),
            target: Target::Graph(0.5),
        }
    }

    #[test]
    fn prepare_builds_in_edges_and_adjacency() {
        let g = PreparedGraph::new(&tiny_graph()).unwrap();
        assert_eq!(g.in_edges[0], vec![(1, 1)]);
        assert_eq!(g.in_edges[1].len(), 2);
        // path graph degrees with self-loop: d0 = 2, d1 = 3, d2 = 2
        let w01 = g.gcn_adj[0]
            .iter()
            .find(|(s, _)| *s == 1)
            .map(|(_, w)| *w)
            .unwrap();
        assert!((w01 - 1.0 / (2.0f64.sqrt() * 3.0f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn prepare_rejects_out_of_range_edges() {
        let mut g = tiny_graph();
        g.edges.push((0, 9));
        g.edge_features = Matrix::zeros(5, 1);
        assert!(PreparedGraph::new(&g).is_err());
    }

    #[test]
    fn stable_sum_is_permutation_invariant() {
        let mut a = [0.1, 1e16, -0.1, -1e16, 1.0];
        let mut b = [1.0, -1e16, 0.1, 1e16, -0.1];
        assert_eq!(stable_sum(&mut a).to_bits(), stable_sum(&mut b).to_bits());
    }
}

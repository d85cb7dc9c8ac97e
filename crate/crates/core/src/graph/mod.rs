//! Weighted undirected graphs, their Laplacians, and graph-geodesic utilities.

mod generate;
mod geodesic;
mod laplacian;
mod mesh;

pub use generate::{complete_graph, path_graph, random_connected_graph};
pub use geodesic::{dijkstra_distances, farthest_point_sampling, EdgeLength};
pub use laplacian::{laplacian, LaplacianKind, LaplacianPair};
pub use mesh::{Mesh, MeshGraph, MeshWeighting, COTANGENT_FLOOR};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// How edge weights are assigned when reading an edge list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeWeighting {
    /// Use the third column, defaulting to 1 when absent.
    Given,
    Unit,
    /// `exp(-|p_u - p_v|^2 / sigma^2)`; needs node positions.
    Gaussian {
        sigma: f64,
    },
}

/// Undirected weighted graph without self-loops or parallel edges.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    positions: Option<Vec<[f64; 3]>>,
}

impl Graph {
    /// Validates and deduplicates the edge set. For repeated unordered pairs
    /// the first occurrence wins.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Validation("graph needs at least one node".into()));
        }
        let mut seen = HashMap::new();
        let mut kept = Vec::new();
        for (i, e) in edges.into_iter().enumerate() {
            if e.u >= n_nodes || e.v >= n_nodes {
                return Err(Error::Validation(format!("edge ({}, {}) references a node >= {n_nodes}", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(Error::SelfLoop { line: i + 1, node: e.u });
            }
            if !(e.w > 0.0) || !e.w.is_finite() {
                return Err(Error::Validation(format!("edge ({}, {}) has non-positive weight {}", e.u, e.v, e.w)));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if seen.insert(key, ()).is_none() {
                kept.push(Edge { u: key.0, v: key.1, w: e.w });
            }
        }
        Ok(Self { n_nodes, edges: kept, positions: None })
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.n_nodes {
            return Err(Error::DimensionMismatch { expected: self.n_nodes, found: positions.len() });
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    /// Weighted degree of every node.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_nodes];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        d
    }

    /// Adjacency lists `(neighbor, weight)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n_nodes
    }

    /// Parses the whitespace-separated edge-list format: one `u v [w]` per
    /// line, 0-based indices, `#` starts a comment.
    pub fn from_edge_list_str(text: &str, weighting: EdgeWeighting, positions: Option<Vec<[f64; 3]>>) -> Result<Self> {
        let mut raw = Vec::new();
        let mut max_node = None::<usize>;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tok: Vec<&str> = content.split_whitespace().collect();
            if tok.len() != 2 && tok.len() != 3 {
                return Err(Error::Parse { line: line_no, message: format!("expected 'u v [w]', got {:?}", content) });
            }
            let parse_node = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse { line: line_no, message: format!("invalid node index {s:?}") })
            };
            let u = parse_node(tok[0])?;
            let v = parse_node(tok[1])?;
            if u == v {
                return Err(Error::SelfLoop { line: line_no, node: u });
            }
            let w = match tok.get(2) {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line: line_no, message: format!("invalid weight {s:?}") })?,
                None => 1.0,
            };
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!("line {line_no}: weight {w} must be positive")));
            }
            max_node = Some(max_node.map_or(u.max(v), |m| m.max(u).max(v)));
            raw.push((u, v, w));
        }
        let n_from_edges = max_node.map_or(0, |m| m + 1);
        let n = positions.as_ref().map_or(n_from_edges, |p| p.len().max(n_from_edges));
        let edges: Vec<Edge> = match weighting {
            EdgeWeighting::Given => raw.iter().map(|&(u, v, w)| Edge { u, v, w }).collect(),
            EdgeWeighting::Unit => raw.iter().map(|&(u, v, _)| Edge { u, v, w: 1.0 }).collect(),
            EdgeWeighting::Gaussian { sigma } => {
                let pos = positions
                    .as_ref()
                    .ok_or_else(|| Error::Validation("gaussian weighting needs node positions".into()))?;
                if !(sigma > 0.0) {
                    return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
                }
                raw.iter()
                    .map(|&(u, v, _)| {
                        let pu = pos.get(u).ok_or(Error::DimensionMismatch { expected: u + 1, found: pos.len() })?;
                        let pv = pos.get(v).ok_or(Error::DimensionMismatch { expected: v + 1, found: pos.len() })?;
                        let d2: f64 = (0..3).map(|k| (pu[k] - pv[k]).powi(2)).sum();
                        Ok(Edge { u, v, w: (-d2 / (sigma * sigma)).exp() })
                    })
                    .collect::<Result<_>>()?
            }
        };
        let g = Graph::new(n, edges)?;
        match positions {
            Some(p) => g.with_positions(p),
            None => Ok(g),
        }
    }

    pub fn read_edge_list(
        path: impl AsRef<Path>,
        weighting: EdgeWeighting,
        positions: Option<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_edge_list_str(&text, weighting, positions)
    }
}

/// Reads a `x,y,z` per line position sidecar. A non-numeric first line is
/// taken as a header.
pub fn read_positions_csv(path: impl AsRef<Path>) -> Result<Vec<[f64; 3]>> {
    parse_positions_csv(&std::fs::read_to_string(path)?)
}

pub fn parse_positions_csv(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => out.push([v[0], v[1], v[2]]),
            Err(_) if idx == 0 => continue,
            _ => return Err(Error::Parse { line: idx + 1, message: "expected 'x,y,z'".into() }),
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = Graph::from_edge_list_str("0 1 1.0", EdgeWeighting::Given, None).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.edges(), &[Edge { u: 0, v: 1, w: 1.0 }]);
    }

    #[test]
    fn undirected_duplicates_collapse() {
        let g = Graph::from_edge_list_str("0 1 1.0\n1 0 1.0\n", EdgeWeighting::Given, None).unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn triangle_with_comments_and_missing_weights() {
        let text = "# K3\n0 1\n1 2   # second\n\n2 0\n";
        let g = Graph::from_edge_list_str(text, EdgeWeighting::Given, None).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges().len(), 3);
        assert!(g.edges().iter().all(|e| e.w == 1.0));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = Graph::from_edge_list_str("0 1\n1 x\n", EdgeWeighting::Given, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Graph::from_edge_list_str("0 1 2 3\n", EdgeWeighting::Given, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Graph::from_edge_list_str("-1 1\n", EdgeWeighting::Given, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn self_loop_and_bad_weight_rejected() {
        assert!(matches!(
            Graph::from_edge_list_str("0 1\n2 2\n", EdgeWeighting::Given, None),
            Err(Error::SelfLoop { line: 2, node: 2 })
        ));
        assert!(matches!(
            Graph::from_edge_list_str("0 1 0.0\n", EdgeWeighting::Given, None),
            Err(Error::Validation(_))
        ));
        assert!(matches!(Graph::from_edge_list_str("0 1 -2\n", EdgeWeighting::Given, None), Err(Error::Validation(_))));
    }

    #[test]
    fn gaussian_weights_from_positions() {
        let pos = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let g = Graph::from_edge_list_str("0 1\n0 2\n", EdgeWeighting::Gaussian { sigma: 2.0 }, Some(pos)).unwrap();
        assert!((g.edges()[0].w - (-0.25f64).exp()).abs() < 1e-15);
        assert!((g.edges()[1].w - (-1.0f64).exp()).abs() < 1e-15);
        assert!(Graph::from_edge_list_str("0 1\n", EdgeWeighting::Gaussian { sigma: 1.0 }, None).is_err());
    }

    #[test]
    fn unit_weighting_overrides() {
        let g = Graph::from_edge_list_str("0 1 5.0\n", EdgeWeighting::Unit, None).unwrap();
        assert_eq!(g.edges()[0].w, 1.0);
    }

    #[test]
    fn positions_csv_with_header() {
        let p = parse_positions_csv("x,y,z\n0,1,2\n3.5, 4, 5\n").unwrap();
        assert_eq!(p, vec![[0.0, 1.0, 2.0], [3.5, 4.0, 5.0]]);
        assert!(parse_positions_csv("0,1\n").is_err());
    }
}

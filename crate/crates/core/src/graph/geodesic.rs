use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Graph;
use crate::error::{Error, Result};

/// Length assigned to each edge when measuring graph distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeLength {
    /// Edge weight taken as length.
    #[default]
    Weight,
    Unit,
    /// Euclidean distance between node positions (meshes).
    Euclidean,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn edge_lengths(g: &Graph, metric: EdgeLength) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut adj = g.adjacency();
    match metric {
        EdgeLength::Weight => {}
        EdgeLength::Unit => adj.iter_mut().flatten().for_each(|(_, w)| *w = 1.0),
        EdgeLength::Euclidean => {
            let pos =
                g.positions().ok_or_else(|| Error::Argument("euclidean edge lengths need node positions".into()))?;
            for (u, nbrs) in adj.iter_mut().enumerate() {
                for (v, w) in nbrs.iter_mut() {
                    *w = (0..3).map(|k| (pos[u][k] - pos[*v][k]).powi(2)).sum::<f64>().sqrt();
                }
            }
        }
    }
    Ok(adj)
}

/// Single-source shortest path distances; unreachable nodes get `+inf`.
pub fn dijkstra_distances(g: &Graph, source: usize, metric: EdgeLength) -> Result<Vec<f64>> {
    if source >= g.n_nodes() {
        return Err(Error::Argument(format!("source {source} out of range for {} nodes", g.n_nodes())));
    }
    let adj = edge_lengths(g, metric)?;
    let mut dist = vec![f64::INFINITY; g.n_nodes()];
    relax_from(&adj, source, &mut dist);
    Ok(dist)
}

/// Lowers `dist` with the distances from `source` (multi-source when called repeatedly).
fn relax_from(adj: &[Vec<(usize, f64)>], source: usize, dist: &mut [f64]) {
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, node: source });
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { dist: nd, node: v });
            }
        }
    }
}

/// Greedy farthest point sampling starting from `seed`.
///
/// Each new node maximizes the graph distance to the already selected set;
/// ties go to the lowest node index, so the output is deterministic.
pub fn farthest_point_sampling(g: &Graph, k: usize, seed: usize, metric: EdgeLength) -> Result<Vec<usize>> {
    let n = g.n_nodes();
    if k > n {
        return Err(Error::Argument(format!("cannot sample {k} nodes from a graph with {n}")));
    }
    if seed >= n {
        return Err(Error::Argument(format!("seed {seed} out of range for {n} nodes")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let adj = edge_lengths(g, metric)?;
    let mut min_dist = vec![f64::INFINITY; n];
    let mut selected = vec![seed];
    relax_from(&adj, seed, &mut min_dist);
    while selected.len() < k {
        let mut best = None::<(usize, f64)>;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > 0.0 && best.map_or(true, |(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        // Only already-selected (or coincident) nodes remain.
        let next = match best {
            Some((i, _)) => i,
            None => (0..n).find(|i| !selected.contains(i)).expect("k <= n"),
        };
        selected.push(next);
        relax_from(&adj, next, &mut min_dist);
    }
    Ok(selected)
}

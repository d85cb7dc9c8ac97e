use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph};

pub fn path_graph(n: usize) -> Graph {
    Graph::new(n, (0..n.saturating_sub(1)).map(|i| Edge { u: i, v: i + 1, w: 1.0 })).expect("valid path")
}

pub fn complete_graph(n: usize) -> Graph {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            e.push(Edge { u, v, w: 1.0 });
        }
    }
    Graph::new(n, e).expect("valid complete graph")
}

/// Connected random graph: a random spanning tree plus `extra_edges` random
/// chords, weights uniform in `[0.5, 2)`. Deterministic in `seed`.
pub fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n + extra_edges);
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push(Edge { u, v, w: rng.gen_range(0.5..2.0) });
    }
    let max_edges = n * (n - 1) / 2;
    let target = (n - 1 + extra_edges).min(max_edges);
    let mut present: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
    while present.len() < target {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || !present.insert((u.min(v), u.max(v))) {
            continue;
        }
        edges.push(Edge { u, v, w: rng.gen_range(0.5..2.0) });
    }
    Graph::new(n, edges).expect("generator produces valid edges")
}

use std::collections::BTreeMap;
use std::path::Path;

use super::{Edge, Graph};
use crate::error::{Error, Result};

/// Lower clamp for cotangent weights; keeps the Laplacian PSD on obtuse or
/// degenerate meshes.
pub const COTANGENT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshWeighting {
    Uniform,
    Cotangent,
}

/// Triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

/// Graph extracted from a mesh plus the warnings collected on the way.
#[derive(Debug, Clone)]
pub struct MeshGraph {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

impl Mesh {
    /// Parses an OFF file with triangular faces.
    pub fn parse_off(text: &str) -> Result<Self> {
        let mut tokens = OffTokens::new(text);
        let (line, head) = tokens.next_token("header")?;
        if head != "OFF" {
            return Err(Error::UnsupportedFormat(format!("line {line}: expected 'OFF' header, got {head:?}")));
        }
        let n_vertices: usize = tokens.parse("vertex count")?;
        let n_faces: usize = tokens.parse("face count")?;
        let _n_edges: usize = tokens.parse("edge count")?;
        let mut positions = Vec::with_capacity(n_vertices);
        for _ in 0..n_vertices {
            let mut p = [0.0; 3];
            for c in &mut p {
                *c = tokens.parse("coordinate")?;
            }
            positions.push(p);
        }
        let mut triangles = Vec::with_capacity(n_faces);
        for f in 0..n_faces {
            let k: usize = tokens.parse("face arity")?;
            if k != 3 {
                return Err(Error::UnsupportedFormat(format!(
                    "face {f} has {k} vertices; only triangles are supported"
                )));
            }
            let mut tri = [0usize; 3];
            for v in &mut tri {
                *v = tokens.parse("face index")?;
                if *v >= n_vertices {
                    return Err(Error::Validation(format!("face {f} references vertex {v} >= {n_vertices}")));
                }
            }
            triangles.push(tri);
        }
        Ok(Self { positions, triangles })
    }

    pub fn read_off(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_off(&std::fs::read_to_string(path)?)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.positions.len(), self.triangles.len());
        for p in &self.positions {
            s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        for t in &self.triangles {
            s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }

    /// Torus with `nu * nv` vertices, major radius `big_r`, minor radius `small_r`.
    pub fn torus(nu: usize, nv: usize, big_r: f64, small_r: f64) -> Self {
        use std::f64::consts::TAU;
        let mut positions = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let a = TAU * i as f64 / nu as f64;
            for j in 0..nv {
                let b = TAU * j as f64 / nv as f64;
                let r = big_r + small_r * b.cos();
                positions.push([r * a.cos(), r * a.sin(), small_r * b.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
        let mut triangles = Vec::with_capacity(2 * nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self { positions, triangles }
    }

    /// Builds the edge graph; positions are carried over.
    pub fn to_graph(&self, weighting: MeshWeighting) -> Result<MeshGraph> {
        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut warnings = Vec::new();
        for (f, tri) in self.triangles.iter().enumerate() {
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Validation(format!("face {f} repeats a vertex")));
            }
            let cots = match weighting {
                MeshWeighting::Uniform => None,
                MeshWeighting::Cotangent => {
                    let c = triangle_cotangents(&self.positions, tri);
                    if c.is_none() {
                        warnings.push(format!("face {f} is degenerate (zero area); its cotangent weights are clamped"));
                    }
                    Some(c.unwrap_or([0.0; 3]))
                }
            };
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = weights.entry(key).or_insert(0.0);
                match cots {
                    None => *entry = 1.0,
                    // Edge opposite corner k.
                    Some(c) => *entry += 0.5 * c[k],
                }
            }
        }
        let edges = weights.into_iter().map(|((u, v), w)| {
            let w = match weighting {
                MeshWeighting::Uniform => w,
                MeshWeighting::Cotangent => w.max(COTANGENT_FLOOR),
            };
            Edge { u, v, w }
        });
        let graph = Graph::new(self.positions.len(), edges)?.with_positions(self.positions.clone())?;
        Ok(MeshGraph { graph, warnings })
    }
}

/// Whitespace tokens of an OFF file with `#` comments stripped, tagged by line.
struct OffTokens<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> OffTokens<'a> {
    fn new(text: &'a str) -> Self {
        let tokens = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split('#').next().unwrap_or("").split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { tokens, pos: 0 }
    }

    fn next_token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self.tokens.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.tokens.last().map_or(1, |t| t.0),
            message: format!("unexpected end of file reading {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, t) = self.next_token(what)?;
        t.parse().map_err(|_| Error::Parse { line, message: format!("invalid {what} {t:?}") })
    }
}

/// Cotangent of the interior angle at each corner, or `None` for zero area.
fn triangle_cotangents(pos: &[[f64; 3]], tri: &[usize; 3]) -> Option<[f64; 3]> {
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross_norm = |a: [f64; 3], b: [f64; 3]| {
        let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        dot(c, c).sqrt()
    };
    let mut out = [0.0; 3];
    for k in 0..3 {
        let p = pos[tri[k]];
        let e1 = sub(pos[tri[(k + 1) % 3]], p);
        let e2 = sub(pos[tri[(k + 2) % 3]], p);
        let area2 = cross_norm(e1, e2);
        let scale = dot(e1, e1).max(dot(e2, e2));
        if area2 <= 1e-14 * scale || scale == 0.0 {
            return None;
        }
        out[k] = dot(e1, e2) / area2;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight(g: &Graph, u: usize, v: usize) -> f64 {
        g.edges().iter().find(|e| (e.u, e.v) == (u.min(v), u.max(v))).unwrap().w
    }

    #[test]
    fn right_isoceles_triangle() {
        let off = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let g = Mesh::parse_off(off).unwrap().to_graph(MeshWeighting::Cotangent).unwrap().graph;
        assert!((weight(&g, 0, 1) - 0.5).abs() < 1e-15);
        assert!((weight(&g, 0, 2) - 0.5).abs() < 1e-15);
        assert_eq!(weight(&g, 1, 2), COTANGENT_FLOOR);
        assert!(g.positions().is_some());
    }

    #[test]
    fn regular_tetrahedron_is_uniform() {
        let off = "OFF\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
        let g = Mesh::parse_off(off).unwrap().to_graph(MeshWeighting::Cotangent).unwrap().graph;
        assert_eq!(g.edges().len(), 6);
        let w0 = g.edges()[0].w;
        // Each edge sees two 60° angles: (cot 60° + cot 60°) / 2 = 1/√3.
        assert!((w0 - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!(g.edges().iter().all(|e| (e.w - w0).abs() < 1e-14));
    }

    #[test]
    fn split_square_diagonal_is_clamped() {
        let off = "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";
        let g = Mesh::parse_off(off).unwrap().to_graph(MeshWeighting::Cotangent).unwrap().graph;
        assert_eq!(weight(&g, 0, 2), COTANGENT_FLOOR);
        assert!((weight(&g, 0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_warns_and_clamps() {
        let off = "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n";
        let mg = Mesh::parse_off(off).unwrap().to_graph(MeshWeighting::Cotangent).unwrap();
        assert_eq!(mg.warnings.len(), 1);
        assert!(mg.graph.edges().iter().all(|e| e.w == COTANGENT_FLOOR));
    }

    #[test]
    fn quads_are_unsupported() {
        let off = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(Mesh::parse_off(off), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(Mesh::parse_off("PLY\n"), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn uniform_weighting_and_off_round_trip() {
        let m = Mesh::torus(6, 5, 2.0, 0.5);
        let again = Mesh::parse_off(&m.to_off()).unwrap();
        assert_eq!(again.triangles, m.triangles);
        let g = again.to_graph(MeshWeighting::Uniform).unwrap().graph;
        assert_eq!(g.n_nodes(), 30);
        // Closed torus triangulation: E = 3V.
        assert_eq!(g.edges().len(), 90);
        assert!(g.edges().iter().all(|e| e.w == 1.0));
        assert!(g.is_connected());
    }
}

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{check_len, Error, Result};
use crate::sparse::{CsrMatrix, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianKind {
    /// `L = D - W`.
    Combinatorial,
    /// `D⁻¹ L`, kept as the pair `(L, D)` so inner products can be D-weighted.
    RandomWalk,
    /// `D^{-1/2} L D^{-1/2}`.
    SymmetricNormalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comb" | "combinatorial" => Ok(Self::Combinatorial),
            "rw" | "random-walk" => Ok(Self::RandomWalk),
            "sym" | "symmetric" | "symmetric-normalized" => Ok(Self::SymmetricNormalized),
            other => Err(Error::Argument(format!("unknown Laplacian kind {other:?}"))),
        }
    }
}

/// A Laplacian as a stiffness/mass pair.
///
/// The operator acted on is `M⁻¹ K`, with `K = matrix` and `M = mass()`.
/// For the random-walk kind `K = L` and `M = D`; for the other kinds the
/// mass is the identity and `K` is the Laplacian itself. Every operator here
/// is self-adjoint in the `M`-weighted inner product.
#[derive(Debug, Clone)]
pub struct LaplacianPair {
    matrix: CsrMatrix,
    degrees: Vec<f64>,
    mass: Vec<f64>,
    kind: LaplacianKind,
}

/// Builds the Laplacian of `g` with the requested normalization.
pub fn laplacian(g: &Graph, kind: LaplacianKind) -> Result<LaplacianPair> {
    let n = g.n_nodes();
    let degrees = g.degrees();
    if kind != LaplacianKind::Combinatorial {
        if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::ZeroDegree { node });
        }
    }
    let mut t = Vec::with_capacity(n + 2 * g.edges().len());
    for (i, &d) in degrees.iter().enumerate() {
        t.push((i, i, d));
    }
    for e in g.edges() {
        t.push((e.u, e.v, -e.w));
        t.push((e.v, e.u, -e.w));
    }
    let comb = CsrMatrix::from_triplets(n, n, &t)?;
    let (matrix, mass) = match kind {
        LaplacianKind::Combinatorial => (comb, vec![1.0; n]),
        LaplacianKind::RandomWalk => (comb, degrees.clone()),
        LaplacianKind::SymmetricNormalized => {
            let s: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
            (comb.scale_rows_cols(&s, &s)?, vec![1.0; n])
        }
    };
    Ok(LaplacianPair { matrix, degrees, mass, kind })
}

impl LaplacianPair {
    /// Wraps an arbitrary symmetric stiffness matrix and positive mass.
    pub fn from_parts(matrix: CsrMatrix, mass: Vec<f64>, kind: LaplacianKind) -> Result<Self> {
        check_len(matrix.n_rows(), mass.len())?;
        check_len(matrix.n_rows(), matrix.n_cols())?;
        if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::ZeroDegree { node: i });
        }
        let degrees = matrix.diagonal();
        Ok(Self { matrix, degrees, mass, kind })
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }
    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }
    /// Stiffness matrix `K`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }
    /// Diagonal mass `M` of the pair (degrees for random-walk, ones otherwise).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `y <- M⁻¹ K x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.spmv_into(x, y);
        for (yi, m) in y.iter_mut().zip(&self.mass) {
            *yi /= m;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), x.len())?;
        let mut y = vec![0.0; self.n()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// The operator `M⁻¹ K` as an explicit sparse matrix.
    pub fn operator_matrix(&self) -> CsrMatrix {
        let inv: Vec<f64> = self.mass.iter().map(|m| 1.0 / m).collect();
        self.matrix.scale_rows_cols(&inv, &vec![1.0; self.n()]).expect("dimensions checked at construction")
    }

    /// `⟨f, g⟩_M`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }
}

impl LinearOperator for LaplacianPair {
    fn nrows(&self) -> usize {
        self.n()
    }
    fn ncols(&self) -> usize {
        self.n()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        LaplacianPair::apply_into(self, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::{complete, path};
    use crate::graph::Edge;

    #[test]
    fn k2_combinatorial() {
        let lap = laplacian(&path(2), LaplacianKind::Combinatorial).unwrap();
        assert_eq!(lap.matrix().to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(lap.degrees(), &[1.0, 1.0]);
    }

    #[test]
    fn k2_random_walk_equals_combinatorial() {
        let comb = laplacian(&path(2), LaplacianKind::Combinatorial).unwrap();
        let rw = laplacian(&path(2), LaplacianKind::RandomWalk).unwrap();
        assert_eq!(rw.operator_matrix().to_dense(), comb.matrix().to_dense());
    }

    #[test]
    fn rows_sum_to_zero_and_off_diagonals_nonpositive() {
        let g = Graph::new(
            4,
            [
                Edge { u: 0, v: 1, w: 0.5 },
                Edge { u: 1, v: 2, w: 2.0 },
                Edge { u: 2, v: 3, w: 1.5 },
                Edge { u: 0, v: 3, w: 3.0 },
            ],
        )
        .unwrap();
        let lap = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        let l = lap.matrix();
        assert!(l.is_symmetric(0.0));
        let ones = vec![1.0; 4];
        let r = l.spmv(&ones).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12 * l.max_abs()));
        for row in 0..4 {
            for (c, v) in l.row(row) {
                if c != row {
                    assert!(v <= 0.0);
                } else {
                    assert_eq!(v, lap.degrees()[row]);
                }
            }
        }
    }

    #[test]
    fn isolated_node_fails_for_normalized_kinds() {
        let g = Graph::new(3, [Edge { u: 0, v: 1, w: 1.0 }]).unwrap();
        assert!(laplacian(&g, LaplacianKind::Combinatorial).is_ok());
        assert!(matches!(laplacian(&g, LaplacianKind::RandomWalk), Err(Error::ZeroDegree { node: 2 })));
        assert!(matches!(laplacian(&g, LaplacianKind::SymmetricNormalized), Err(Error::ZeroDegree { node: 2 })));
    }

    #[test]
    fn random_walk_is_mass_adjoint() {
        let g = Graph::new(
            5,
            [
                Edge { u: 0, v: 1, w: 1.0 },
                Edge { u: 1, v: 2, w: 3.0 },
                Edge { u: 2, v: 3, w: 0.2 },
                Edge { u: 3, v: 4, w: 1.0 },
                Edge { u: 4, v: 0, w: 2.5 },
                Edge { u: 1, v: 3, w: 0.7 },
            ],
        )
        .unwrap();
        let lap = laplacian(&g, LaplacianKind::RandomWalk).unwrap();
        let f = [0.3, -1.2, 2.0, 0.1, 0.9];
        let h = [1.0, 0.5, -0.4, 2.2, -1.0];
        let lhs = lap.inner(&lap.apply(&f).unwrap(), &h);
        let rhs = lap.inner(&f, &lap.apply(&h).unwrap());
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn symmetric_normalized_has_unit_diagonal() {
        let lap = laplacian(&complete(4), LaplacianKind::SymmetricNormalized).unwrap();
        assert!(lap.matrix().diagonal().iter().all(|d| (d - 1.0).abs() < 1e-15));
        assert!(lap.matrix().is_symmetric(1e-15));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("rw".parse::<LaplacianKind>().unwrap(), LaplacianKind::RandomWalk);
        assert!("foo".parse::<LaplacianKind>().is_err());
    }
}

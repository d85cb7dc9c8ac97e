//! Sparse LDLᵀ factorization (up-looking, elimination-tree driven) with a
//! reverse Cuthill-McKee ordering to limit fill.

use std::collections::VecDeque;

use super::CsrMatrix;
use crate::error::{check_len, Error, Result};

/// Pivots smaller than this fraction of the original diagonal entry are
/// treated as loss of definiteness.
const PIVOT_RATIO: f64 = 1e-12;

const NONE: usize = usize::MAX;

/// Reusable factorization `P A Pᵀ = L D Lᵀ` of a symmetric positive definite matrix.
///
/// Immutable once built; [`LdlFactor::solve`] allocates its own workspace so
/// one factor can serve concurrent solves.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
}

/// Factors a symmetric positive definite matrix. Only the lower triangle
/// (after permutation) is read, so the input must actually be symmetric.
pub fn prefactorize(a: &CsrMatrix) -> Result<LdlFactor> {
    LdlFactor::new(a)
}

impl LdlFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        check_len(n, a.n_cols())?;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut triplets = Vec::with_capacity(a.nnz());
        for r in 0..n {
            for (c, v) in a.row(r) {
                triplets.push((inv[r], inv[c], v));
            }
        }
        let b = CsrMatrix::from_triplets(n, n, &triplets)?;

        // Symbolic: elimination tree and column counts, reading row k's
        // entries left of the diagonal (= column k's entries above it).
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (mut i, _) in b.row(k) {
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + lnz[k];
        }
        let total = l_ptr[n];
        let mut l_idx = vec![0usize; total];
        let mut l_val = vec![0.0; total];

        // Numeric.
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut filled = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = NONE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let mut diag_orig = 0.0;
            for (mut i, v) in b.row(k) {
                if i > k {
                    continue;
                }
                if i == k {
                    diag_orig = v;
                }
                y[i] += v;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = l_ptr[i];
                let end = start + filled[i];
                for p in start..end {
                    y[l_idx[p]] -= l_val[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                l_idx[end] = k;
                l_val[end] = l_ki;
                filled[i] += 1;
            }
            if !(diag_orig > 0.0) || !(d[k] > PIVOT_RATIO * diag_orig) {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d[k] });
            }
        }
        Ok(Self { n, perm, l_ptr, l_idx, l_val, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub(crate) fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let adj: Vec<Vec<usize>> = (0..n).map(|r| a.row(r).map(|(c, _)| c).filter(|&c| c != r).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (Vec<usize>, usize) {
        let mut seen = visited.to_vec();
        let mut level = vec![0usize; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(u) = queue.pop_front() {
            last = u;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level, last)
    };

    while order.len() < n {
        let mut start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        // Two sweeps towards a pseudo-peripheral node.
        for _ in 0..2 {
            let (_, far) = bfs_levels(start, &visited);
            start = far;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree[v], v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor_solves_trivially() {
        let f = prefactorize(&CsrMatrix::identity(4)).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn k2_plus_degree_matrix() {
        // (L + D) for K2 = [[2, -1], [-1, 2]]; (1, 1) is mapped to itself.
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]).unwrap();
        let x = prefactorize(&a).unwrap().solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_laplacian_is_rejected() {
        let l = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(prefactorize(&l), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(prefactorize(&a).is_err());
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mut t = Vec::new();
        for i in 0..9 {
            t.push((i, i, 4.0));
            for j in [i + 1, i + 3] {
                if j < 9 {
                    t.push((i, j, -1.0));
                    t.push((j, i, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(9, 9, &t).unwrap();
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn grid_laplacian_plus_identity_matches_dense() {
        let side = 6;
        let n = side * side;
        let mut t = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                let mut deg = 0.0;
                for (dr, dc) in [(0i64, 1i64), (1, 0), (0, -1), (-1, 0)] {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < side && (cc as usize) < side {
                        t.push((i, rr as usize * side + cc as usize, -1.0));
                        deg += 1.0;
                    }
                }
                t.push((i, i, deg + 0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = prefactorize(&a).unwrap().solve(&b).unwrap();
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
    }
}

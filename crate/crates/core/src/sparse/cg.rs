use std::fmt;

use serde::{Deserialize, Serialize};

use super::{axpy, dot, norm2, LinearOperator};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, residual {:.3e}, {}",
            self.iterations,
            self.residual_norm,
            if self.converged { "converged" } else { "not converged" }
        )
    }
}

#[derive(Debug, Clone, Default)]
pub enum Preconditioner {
    #[default]
    None,
    /// Inverse of the given diagonal.
    Jacobi(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct CgOptions {
    /// Relative tolerance on `||A x - b|| / ||b||`.
    pub tol: f64,
    /// `None` means `10 * n`.
    pub max_iter: Option<usize>,
    pub precond: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None, precond: Preconditioner::None }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

impl Solution {
    /// Turns a non-converged solve into an error.
    pub fn into_converged(self) -> Result<Vec<f64>> {
        if self.report.converged {
            Ok(self.x)
        } else {
            Err(Error::NoConvergence { report: self.report })
        }
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite operators.
///
/// Non-convergence is not an error here: the best iterate comes back with
/// `report.converged == false` and the caller decides.
pub fn cg_solve<A: LinearOperator + ?Sized>(a: &A, b: &[f64], opts: &CgOptions) -> Result<Solution> {
    let n = a.nrows();
    check_len(n, b.len())?;
    check_len(n, a.ncols())?;
    if !(opts.tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let inv_diag = match &opts.precond {
        Preconditioner::None => None,
        Preconditioner::Jacobi(d) => {
            check_len(n, d.len())?;
            if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d[i] });
            }
            Some(d.iter().map(|v| 1.0 / v).collect::<Vec<_>>())
        }
    };
    let precondition = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r).zip(inv).for_each(|((zi, ri), di)| *zi = ri * di),
        None => z.copy_from_slice(r),
    };

    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(Solution { x, report: SolveReport { iterations: 0, residual_norm: 0.0, converged: true } });
    }
    let target = opts.tol * b_norm;

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while iterations < max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        if norm2(&r) <= target {
            break;
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    // Recompute the true residual; the recurrence drifts on long runs.
    a.apply_into(&x, &mut ap);
    let true_res = ap.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    Ok(Solution { x, report: SolveReport { iterations, residual_norm: true_res, converged: true_res <= target } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_solves_in_one_iteration() {
        let b = vec![1.0, -2.0, 0.5, 7.0];
        let sol = cg_solve(&CsrMatrix::identity(4), &b, &CgOptions::default()).unwrap();
        assert!(sol.report.converged);
        assert!(sol.report.iterations <= 1);
        for (x, y) in sol.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_solve() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 4.0]);
        let sol = cg_solve(&a, &[1.0, 2.0, 4.0], &CgOptions::default()).unwrap();
        for x in sol.x {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_preconditioner_converges() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 10.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 0.2), (2, 2, 1000.0)])
            .unwrap();
        let opts = CgOptions { precond: Preconditioner::Jacobi(a.diagonal()), ..CgOptions::default() };
        let b = [1.0, 1.0, 1.0];
        let sol = cg_solve(&a, &b, &opts).unwrap();
        assert!(sol.report.converged);
        let ax = a.spmv(&sol.x).unwrap();
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn max_iter_exhaustion_is_reported_not_raised() {
        let n = 50;
        let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let a = CsrMatrix::from_diagonal(&diag);
        let b = vec![1.0; n];
        let opts = CgOptions { tol: 1e-14, max_iter: Some(3), precond: Preconditioner::None };
        let sol = cg_solve(&a, &b, &opts).unwrap();
        assert!(!sol.report.converged);
        assert_eq!(sol.report.iterations, 3);
        assert!(matches!(sol.into_converged(), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn zero_rhs_is_immediate() {
        let sol = cg_solve(&CsrMatrix::identity(3), &[0.0; 3], &CgOptions::default()).unwrap();
        assert_eq!(sol.report.iterations, 0);
        assert!(sol.report.converged);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(cg_solve(&CsrMatrix::identity(2), &[1.0, 1.0], &CgOptions::with_tol(0.0)).is_err());
    }
}

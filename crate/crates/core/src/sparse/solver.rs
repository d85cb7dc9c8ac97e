use super::{cg_solve, CgOptions, CsrMatrix, LdlFactor, Preconditioner, SolveReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Systems up to this size are factored directly; larger ones use CG + Jacobi.
    pub direct_threshold: usize,
    pub tol: f64,
    /// `None` means `10 * n`.
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { direct_threshold: 5000, tol: 1e-10, max_iter: None }
    }
}

impl SolverConfig {
    pub fn cg_options(&self, precond: Preconditioner) -> CgOptions {
        CgOptions { tol: self.tol, max_iter: self.max_iter, precond }
    }
}

/// A symmetric positive definite system prepared for repeated solves.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(LdlFactor),
    Iterative { matrix: CsrMatrix, options: CgOptions },
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix, config: &SolverConfig) -> Result<Self> {
        if matrix.n_rows() <= config.direct_threshold {
            Ok(SpdSolver::Direct(LdlFactor::new(&matrix)?))
        } else {
            let diag = matrix.diagonal();
            if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: diag[i] });
            }
            let options = config.cg_options(Preconditioner::Jacobi(diag));
            Ok(SpdSolver::Iterative { matrix, options })
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SpdSolver::Direct(_))
    }

    /// Solves and returns the CG report when the iterative path ran.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, Option<SolveReport>)> {
        match self {
            SpdSolver::Direct(f) => Ok((f.solve(b)?, None)),
            SpdSolver::Iterative { matrix, options } => {
                let sol = cg_solve(matrix, b, options)?;
                let report = sol.report;
                Ok((sol.into_converged()?, Some(report)))
            }
        }
    }
}

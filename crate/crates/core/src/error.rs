use thiserror::Error;

use crate::sparse::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node {node} rejected")]
    SelfLoop { line: usize, node: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("node {node} has zero degree; normalized Laplacians need every node connected")]
    ZeroDegree { node: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("iterative solve did not converge: {report}")]
    NoConvergence { report: SolveReport },

    #[error("solve failed at recursion step {step}: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem size {n} exceeds the dense cap {cap}; use a spectrum-free method")]
    SizeCap { n: usize, cap: usize },

    #[error("filter is singular at eigenvalue {lambda:e}")]
    SingularFilter { lambda: f64 },

    #[error("non-finite filter sample at {at:e}")]
    NonFiniteSample { at: f64 },

    #[error("rank-deficient system: {0}")]
    Rank(String),

    #[error("value {value:e} outside tabulated range [{lo:e}, {hi:e}]")]
    Extrapolation { value: f64, lo: f64, hi: f64 },

    #[error("spectrum not certified inside [-1, 1] (Gershgorin radius {radius:e})")]
    Mapping { radius: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NoConvergence { .. }
            | Error::SingularFilter { .. }
            | Error::NonFiniteSample { .. }
            | Error::Rank(_)
            | Error::Mapping { .. } => true,
            Error::StepFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

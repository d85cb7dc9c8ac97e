//! Spectrum-free spectral processing on graphs.
//!
//! Filters `φ` of a graph Laplacian are applied to signals without
//! computing eigenpairs, through Chebyshev polynomial recursions, rational
//! (Padé and Chebyshev-Padé) filters solved with matrix-free conjugate
//! gradients, and the Chebyshev-rational recursion that needs one
//! prefactored sparse SPD solve per term. A dense generalized
//! eigendecomposition serves as the reference implementation.

pub mod apps;
pub mod cheb;
pub mod error;
pub mod filter;
pub mod graph;
pub mod io;
pub mod methods;
pub mod oracle;
pub mod rational;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
pub use filter::FilterSpec;
pub use methods::{FilterEngine, Method};

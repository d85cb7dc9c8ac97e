//! Signal reconstruction and smoothing over kernel bases.
//!
//! A basis is a set of graph signals: leading Laplacian eigenvectors,
//! commute-time kernel columns, or diffusion kernel columns at several
//! scales, with kernel centers chosen by farthest point sampling. Signals
//! are projected onto the basis by least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::filter::FilterSpec;
use crate::graph::{farthest_point_sampling, EdgeLength, Graph};
use crate::methods::{FilterEngine, Method};

/// Diffusion scales used when none are given.
pub const DEFAULT_DIFFUSION_SCALES: [f64; 4] = [1e-3, 1e-2, 1e-1, 0.5];

/// Ridge weight, relative to `σ_max²`, for rank-deficient projections.
pub const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    /// The `k` eigenvectors of smallest eigenvalue.
    Eigs { k: usize },
    /// The constant signal and commute-time kernel columns at `k` seeds.
    Harmonic { k: usize },
    /// Diffusion kernel columns at `k` seeds, one per scale.
    Diffusion { k: usize, scales: Vec<f64> },
}

impl BasisSpec {
    /// Parses `eigs:K`, `harmonic:K` or `diffusion:K`; diffusion takes `scales`,
    /// or the defaults when empty.
    pub fn parse(spec: &str, scales: &[f64]) -> Result<Self> {
        let (name, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("basis {spec:?} needs a size, as in eigs:20")))?;
        let k: usize = arg.trim().parse().map_err(|_| Error::Argument(format!("bad basis size {arg:?}")))?;
        if k == 0 {
            return Err(Error::Argument("basis size must be positive".into()));
        }
        match name.trim() {
            "eigs" => Ok(Self::Eigs { k }),
            "harmonic" => Ok(Self::Harmonic { k }),
            "diffusion" => {
                let scales = if scales.is_empty() { DEFAULT_DIFFUSION_SCALES.to_vec() } else { scales.to_vec() };
                if scales.iter().any(|t| !(*t > 0.0)) {
                    return Err(Error::Argument(format!("diffusion scales must be positive, got {scales:?}")));
                }
                Ok(Self::Diffusion { k, scales })
            }
            other => Err(Error::Argument(format!("unknown basis {other:?}"))),
        }
    }

    /// Basis columns contributed per seed (or per eigenvector).
    pub fn columns_per_seed(&self) -> usize {
        match self {
            Self::Diffusion { scales, .. } => scales.len(),
            _ => 1,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Eigs { k } | Self::Harmonic { k } | Self::Diffusion { k, .. } => *k,
        }
    }
}

/// How kernel bases are computed.
#[derive(Debug, Clone, Copy)]
pub struct BasisOptions {
    pub method: Method,
    /// First farthest-point seed.
    pub fps_start: usize,
    pub metric: EdgeLength,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            method: Method::ChebRational { terms: crate::methods::DEFAULT_CHEB_RATIONAL_TERMS },
            fps_start: 0,
            metric: EdgeLength::Weight,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Basis {
    pub columns: DMatrix<f64>,
    pub labels: Vec<String>,
    pub seeds: Vec<usize>,
    /// Leading columns that must be kept in every prefix (the constant of
    /// the harmonic basis).
    pub fixed: usize,
    pub per_seed: usize,
}

impl Basis {
    /// Column count of the prefix holding `k` seeds or eigenvectors.
    pub fn prefix_columns(&self, k: usize) -> usize {
        (self.fixed + k * self.per_seed).min(self.columns.ncols())
    }
}

pub fn build_basis(g: &Graph, engine: &FilterEngine, spec: &BasisSpec, opts: &BasisOptions) -> Result<Basis> {
    let n = engine.laplacian().n();
    check_len(n, g.n_nodes())?;
    let k = spec.size();
    if k > n {
        return Err(Error::Argument(format!("basis size {k} exceeds {n} nodes")));
    }
    match spec {
        BasisSpec::Eigs { k } => {
            let es = engine.eigensystem()?;
            Ok(Basis {
                columns: es.vectors().columns(0, *k).into_owned(),
                labels: (0..*k).map(|i| format!("eig{i}")).collect(),
                seeds: Vec::new(),
                fixed: 0,
                per_seed: 1,
            })
        }
        BasisSpec::Harmonic { k } => {
            let seeds = farthest_point_sampling(g, *k, opts.fps_start, opts.metric)?;
            let cols = kernel_columns(engine, &seeds, &[FilterSpec::commute_time()], opts.method)?;
            let mut columns = DMatrix::from_element(n, seeds.len() + 1, 1.0);
            for (j, c) in cols.iter().enumerate() {
                columns.set_column(j + 1, &DVector::from_column_slice(c));
            }
            let mut labels = vec!["constant".to_string()];
            labels.extend(seeds.iter().map(|s| format!("harmonic@{s}")));
            Ok(Basis { columns, labels, seeds, fixed: 1, per_seed: 1 })
        }
        BasisSpec::Diffusion { k, scales } => {
            let seeds = farthest_point_sampling(g, *k, opts.fps_start, opts.metric)?;
            let filters: Vec<FilterSpec> = scales.iter().map(|&t| FilterSpec::diffusion(t)).collect();
            let cols = kernel_columns(engine, &seeds, &filters, opts.method)?;
            let columns = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
            let labels =
                seeds.iter().flat_map(|s| scales.iter().map(move |t| format!("diffusion@{s}:t={t}"))).collect();
            Ok(Basis { columns, labels, seeds, fixed: 0, per_seed: scales.len() })
        }
    }
}

/// `φ(L̃) δ_p` for every seed `p` and filter, seed-major.
pub fn kernel_columns(
    engine: &FilterEngine,
    seeds: &[usize],
    filters: &[FilterSpec],
    method: Method,
) -> Result<Vec<Vec<f64>>> {
    let n = engine.laplacian().n();
    if let Some(&p) = seeds.iter().find(|&&p| p >= n) {
        return Err(Error::Argument(format!("seed {p} out of range for {n} nodes")));
    }
    let jobs: Vec<(usize, &FilterSpec)> = seeds.iter().flat_map(|&p| filters.iter().map(move |f| (p, f))).collect();
    jobs.par_iter()
        .map(|&(p, filter)| {
            let mut delta = vec![0.0; n];
            delta[p] = 1.0;
            Ok(engine.apply(&delta, filter, method)?.signal)
        })
        .collect()
}

/// Least-squares coefficients of `f` in the columns of `a`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub fitted: Vec<f64>,
    /// Set when the basis was numerically rank-deficient and a ridge term
    /// was added.
    pub regularized: bool,
}

pub fn least_squares_projection(a: &DMatrix<f64>, f: &[f64]) -> Result<Projection> {
    check_len(a.nrows(), f.len())?;
    if a.ncols() == 0 {
        return Ok(Projection { coeffs: Vec::new(), fitted: vec![0.0; f.len()], regularized: false });
    }
    // Householder QR rather than an SVD: nalgebra's SVD can return
    // inaccurate singular vectors when the singular values cluster.
    let gram = a.tr_mul(a);
    let smax = SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt();
    if !(smax > 0.0) {
        return Err(Error::Rank("basis is identically zero".into()));
    }
    let rank_tol = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let deficient = a.ncols() > a.nrows() || {
        let r = a.clone().col_piv_qr().r();
        r.diagonal().iter().any(|d| d.abs() <= rank_tol)
    };
    let (m, cols) = a.shape();
    let (sys, rhs) = if deficient {
        log::warn!("basis of {cols} columns is rank-deficient; adding a ridge of {RIDGE:e}·σ_max²");
        // min ‖Ax - f‖² + ridge ‖x‖² as least squares on [A; √ridge I].
        let mu = RIDGE.sqrt() * smax;
        let mut sys = DMatrix::zeros(m + cols, cols);
        sys.view_mut((0, 0), (m, cols)).copy_from(a);
        sys.view_mut((m, 0), (cols, cols)).fill_diagonal(mu);
        let mut rhs = DVector::zeros(m + cols);
        rhs.rows_mut(0, m).copy_from_slice(f);
        (sys, rhs)
    } else {
        (a.clone(), DVector::from_column_slice(f))
    };
    let qr = sys.qr();
    let coeffs = qr
        .r()
        .solve_upper_triangular(&qr.q().tr_mul(&rhs))
        .ok_or_else(|| Error::Rank("least-squares system is singular".into()))?;
    let fitted = a * &coeffs;
    Ok(Projection {
        coeffs: coeffs.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        regularized: deficient,
    })
}

/// Relative reconstruction errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorPoint {
    pub k: usize,
    pub columns: usize,
    /// `‖f - g‖∞ / ‖f‖∞`.
    pub linf: f64,
    /// `‖f - g‖₂ / ‖f‖₂`, the norm least squares minimizes.
    pub l2: f64,
    pub regularized: bool,
}

pub fn relative_errors(reference: &[f64], approx: &[f64]) -> (f64, f64) {
    let (mut dmax, mut fmax, mut d2, mut f2) = (0.0f64, 0.0f64, 0.0, 0.0);
    for (a, b) in reference.iter().zip(approx) {
        let d = a - b;
        dmax = dmax.max(d.abs());
        fmax = fmax.max(a.abs());
        d2 += d * d;
        f2 += a * a;
    }
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    (rel(dmax, fmax), rel(d2.sqrt(), f2.sqrt()))
}

/// Projects `target` on the prefixes of `basis` holding `ks` seeds (or
/// eigenvectors) and measures the error against `reference`.
pub fn reconstruction_curve(basis: &Basis, target: &[f64], reference: &[f64], ks: &[usize]) -> Result<Vec<ErrorPoint>> {
    check_len(basis.columns.nrows(), target.len())?;
    check_len(target.len(), reference.len())?;
    ks.par_iter()
        .map(|&k| {
            let cols = basis.prefix_columns(k);
            let proj = least_squares_projection(&basis.columns.columns(0, cols).into_owned(), target)?;
            let (linf, l2) = relative_errors(reference, &proj.fitted);
            Ok(ErrorPoint { k, columns: cols, linf, l2, regularized: proj.regularized })
        })
        .collect()
}

/// `f` plus independent `N(0, sigma²)` noise from a seeded generator.
pub fn add_gaussian_noise(f: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("noise level must be finite and nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(f.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Argument(format!("noise level {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(f.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

#[derive(Debug, Clone)]
pub struct Smoothed {
    pub noisy: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub error: ErrorPoint,
}

/// Adds noise to `clean`, projects it on the full `basis` and measures the
/// result against `clean`.
pub fn smooth_signal(basis: &Basis, clean: &[f64], sigma: f64, seed: u64) -> Result<Smoothed> {
    let noisy = add_gaussian_noise(clean, sigma, seed)?;
    let proj = least_squares_projection(&basis.columns, &noisy)?;
    let (linf, l2) = relative_errors(clean, &proj.fitted);
    let k = (basis.columns.ncols() - basis.fixed) / basis.per_seed.max(1);
    Ok(Smoothed {
        noisy,
        smoothed: proj.fitted,
        error: ErrorPoint { k, columns: basis.columns.ncols(), linf, l2, regularized: proj.regularized },
    })
}

//! Spectrum diagnostics: extreme eigenvalue bounds, pseudo-spectra,
//! Chebyshev moments of the spectral density, characteristic polynomials and
//! filter conditioning.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cheb::cheb_coeffs_fast;
use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::graph::LaplacianPair;
use crate::sparse::{dot, norm2, LinearOperator};

/// Safety factor applied to a power-iteration estimate before it is used as
/// the upper end of a Chebyshev domain.
pub const MAPPING_INFLATION: f64 = 1.05;

/// `min(max row sum, max column sum)` of `|M⁻¹K|`; never below the largest
/// eigenvalue.
pub fn lambda_max_bound(lap: &LaplacianPair) -> f64 {
    let k = lap.matrix();
    let m = lap.mass();
    let mut cols = vec![0.0; lap.n()];
    let mut row_max = 0.0f64;
    for (r, mr) in m.iter().enumerate() {
        let mut s = 0.0;
        for (c, v) in k.row(r) {
            s += v.abs() / mr;
            cols[c] += v.abs() / mr;
        }
        row_max = row_max.max(s);
    }
    let col_max = cols.into_iter().fold(0.0, f64::max);
    row_max.min(col_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    /// `false` means the iteration stalled and `value` is the Gershgorin bound.
    pub converged: bool,
}

/// Largest eigenvalue by power iteration on `M^{-1/2} K M^{-1/2}`.
///
/// Stops when the eigen-residual falls below `tol · λ`.
pub fn power_lambda_max(lap: &LaplacianPair, tol: f64, max_iter: usize) -> PowerEstimate {
    let n = lap.n();
    let s: Vec<f64> = lap.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let bound = lambda_max_bound(lap);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5) * if rng.gen() { 1.0 } else { -1.0 }).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut tmp = vec![0.0; n];
    let mut y = vec![0.0; n];
    let apply = |x: &[f64], tmp: &mut [f64], y: &mut [f64]| {
        for i in 0..n {
            tmp[i] = s[i] * x[i];
        }
        lap.matrix().spmv_into(tmp, y);
        for i in 0..n {
            y[i] *= s[i];
        }
    };
    for it in 1..=max_iter {
        apply(&x, &mut tmp, &mut y);
        let lambda = dot(&x, &y);
        let res = y.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if res <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return PowerEstimate { value: lambda.min(bound), iterations: it, converged: true };
        }
        let ny = norm2(&y);
        if ny == 0.0 {
            return PowerEstimate { value: 0.0, iterations: it, converged: true };
        }
        for i in 0..n {
            x[i] = y[i] / ny;
        }
    }
    log::warn!("power iteration did not converge in {max_iter} steps; using the Gershgorin bound");
    PowerEstimate { value: bound, iterations: max_iter, converged: false }
}

/// Upper end of a Chebyshev domain for `lap`: the inflated power estimate,
/// capped by the Gershgorin bound which is always safe.
pub fn mapping_bound(lap: &LaplacianPair) -> f64 {
    let bound = lambda_max_bound(lap);
    let est = power_lambda_max(lap, 1e-6, 2000);
    if est.converged {
        (est.value * MAPPING_INFLATION).min(bound).max(f64::MIN_POSITIVE)
    } else {
        bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpectrumQuery {
    pub z: f64,
    pub epsilon: f64,
    pub member: bool,
    /// `min_i |z - λ_i|`, the smallest singular value of `zI - A`.
    pub margin: f64,
}

/// Membership of `z` in the ε-pseudo-spectrum of a symmetric matrix with
/// the given eigenvalues.
pub fn pseudo_spectrum_query(eigenvalues: &[f64], z: f64, epsilon: f64) -> PseudoSpectrumQuery {
    let margin = eigenvalues.iter().map(|l| (z - l).abs()).fold(f64::INFINITY, f64::min);
    PseudoSpectrumQuery { z, epsilon, member: margin <= epsilon, margin }
}

fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    Ok(crate::oracle::EigenSystem::from_dense_symmetric(a)?.eigenvalues().to_vec())
}

pub fn pseudo_spectrum_membership(a: &DMatrix<f64>, z: f64, epsilon: f64) -> Result<PseudoSpectrumQuery> {
    if !(epsilon >= 0.0) {
        return Err(Error::Argument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    Ok(pseudo_spectrum_query(&symmetric_eigenvalues(a)?, z, epsilon))
}

/// Membership along a list of probes; the matrix is diagonalized once.
pub fn pseudo_spectrum_scan(a: &DMatrix<f64>, zs: &[f64], epsilon: f64) -> Result<Vec<PseudoSpectrumQuery>> {
    if !(epsilon >= 0.0) {
        return Err(Error::Argument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let eig = symmetric_eigenvalues(a)?;
    Ok(zs.iter().map(|&z| pseudo_spectrum_query(&eig, z, epsilon)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MomentMethod {
    ExactTrace,
    Stochastic { probes: usize, seed: u64 },
}

/// Number of Rademacher probes used when the exact trace is too expensive.
pub const DEFAULT_PROBES: usize = 32;
/// Largest dimension for which the exact trace is the default.
pub const EXACT_TRACE_LIMIT: usize = 2000;

impl MomentMethod {
    pub fn default_for(n: usize, seed: u64) -> Self {
        if n <= EXACT_TRACE_LIMIT {
            Self::ExactTrace
        } else {
            Self::Stochastic { probes: DEFAULT_PROBES, seed }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMoments {
    pub mu: Vec<f64>,
    pub n: usize,
    pub method: MomentMethod,
}

/// `a x + b` applied to a Laplacian pair; with `[lower, upper]` covering the
/// spectrum, the image lies in `[-1, 1]`.
pub struct MappedOperator<'a> {
    lap: &'a LaplacianPair,
    lower: f64,
    upper: f64,
}

impl<'a> MappedOperator<'a> {
    /// Maps `[0, lambda_max_bound]` onto `[-1, 1]`.
    pub fn new(lap: &'a LaplacianPair) -> Self {
        Self { lap, lower: 0.0, upper: lambda_max_bound(lap).max(f64::MIN_POSITIVE) }
    }
    pub fn with_interval(lap: &'a LaplacianPair, lower: f64, upper: f64) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::Argument(format!("empty interval [{lower}, {upper}]")));
        }
        Ok(Self { lap, lower, upper })
    }
    pub fn interval(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
    /// Radius of the mapped spectrum as certified by the Gershgorin bound.
    pub fn certified_radius(&self) -> f64 {
        let b = lambda_max_bound(self.lap);
        let map = |s: f64| (2.0 * s - (self.upper + self.lower)) / (self.upper - self.lower);
        map(b).abs().max(map(0.0).abs())
    }
    /// Maps eigenvalues of the pair into the operator's coordinates.
    pub fn map_value(&self, s: f64) -> f64 {
        (2.0 * s - (self.upper + self.lower)) / (self.upper - self.lower)
    }
}

impl LinearOperator for MappedOperator<'_> {
    fn nrows(&self) -> usize {
        self.lap.n()
    }
    fn ncols(&self) -> usize {
        self.lap.n()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.lap.apply_into(x, y);
        let a = 2.0 / (self.upper - self.lower);
        let b = (self.upper + self.lower) / (self.upper - self.lower);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = a * *yi - b * xi;
        }
    }
}

/// `Σ_k w_k T_k(A) v` contributions: returns `vᵀ T_k(A) v` for `k = 0..=K`.
fn quadratic_forms<A: LinearOperator + ?Sized>(a: &A, v: &[f64], k: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(k + 1);
    let mut prev = v.to_vec();
    out.push(dot(v, v));
    if k == 0 {
        return out;
    }
    let mut cur = a.apply(v);
    out.push(dot(v, &cur));
    let mut tmp = vec![0.0; n];
    for _ in 2..=k {
        a.apply_into(&cur, &mut tmp);
        for i in 0..n {
            prev[i] = 2.0 * tmp[i] - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        out.push(dot(v, &cur));
    }
    out
}

/// Chebyshev moments `μ_k = Tr T_k(A) / n`, `k = 0..=K`.
///
/// `radius_bound` must certify that the spectrum of `a` lies in
/// `[-radius_bound, radius_bound] ⊆ [-1, 1]`.
pub fn spectral_density_moments<A: LinearOperator + Sync + ?Sized>(
    a: &A,
    radius_bound: f64,
    k: usize,
    method: MomentMethod,
) -> Result<DensityMoments> {
    if !(radius_bound <= 1.0 + 1e-12) {
        return Err(Error::Mapping { radius: radius_bound });
    }
    let n = a.nrows();
    let sums = match method {
        MomentMethod::ExactTrace => (0..n)
            .into_par_iter()
            .map(|i| {
                // e_iᵀ T_k(A) e_i; the quadratic form picks the diagonal entry.
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                quadratic_forms(a, &e, k)
            })
            .reduce(|| vec![0.0; k + 1], add_vec),
        MomentMethod::Stochastic { probes, seed } => {
            if probes == 0 {
                return Err(Error::Argument("stochastic trace needs at least one probe".into()));
            }
            let total = (0..probes)
                .into_par_iter()
                .map(|p| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
                    let z: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
                    quadratic_forms(a, &z, k)
                })
                .reduce(|| vec![0.0; k + 1], add_vec);
            total.into_iter().map(|v| v / probes as f64).collect()
        }
    };
    Ok(DensityMoments { mu: sums.into_iter().map(|v| v / n as f64).collect(), n, method })
}

fn add_vec(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// `μ_k = (1/n) Σ_i T_k(λ_i)` directly from eigenvalues in `[-1, 1]`.
pub fn moments_from_eigenvalues(eigenvalues: &[f64], k: usize) -> Vec<f64> {
    let n = eigenvalues.len() as f64;
    (0..=k).map(|j| eigenvalues.iter().map(|&l| crate::cheb::cheb_t(j, l)).sum::<f64>() / n).collect()
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// `Σ_i h_σ(t - λ_i)` with `h_σ` the unit-mass Gaussian.
pub fn gaussian_mixture(eigenvalues: &[f64], grid: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(grid.iter().map(|&t| eigenvalues.iter().map(|&l| gaussian(t - l, sigma)).sum()).collect())
}

/// Smoothed spectral density `(1/n) Σ_i h_σ(t - λ_i)`; integrates to one.
pub fn smooth_density_from_eigenvalues(eigenvalues: &[f64], grid: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let n = eigenvalues.len().max(1) as f64;
    Ok(gaussian_mixture(eigenvalues, grid, sigma)?.into_iter().map(|v| v / n).collect())
}

/// The same smoothed density from Chebyshev moments alone.
///
/// For each `t` the kernel `λ ↦ h_σ(t - λ)` is expanded in Chebyshev
/// polynomials on `[-1, 1]`, and `(1/n) Σ_i h_σ(t - λ_i) = Σ_k c_k(t) μ_k`.
pub fn smooth_density_from_moments(moments: &DensityMoments, grid: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(&t) = grid.iter().find(|t| !(t.abs() <= 1.0)) {
        return Err(Error::Mapping { radius: t.abs() });
    }
    let k = moments.mu.len();
    let nodes = (4 * k).max(256);
    grid.iter()
        .map(|&t| {
            let c = cheb_coeffs_fast(|l| gaussian(t - l, sigma), nodes, -1.0, 1.0)?;
            Ok(c.coeffs.iter().zip(&moments.mu).map(|(a, m)| a * m).sum())
        })
        .collect()
}

/// Groups sorted-or-not eigenvalues into `(value, multiplicity)` clusters
/// whose members lie within `tol` of the cluster's first element.
pub fn group_eigenvalues(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((first, m, sum)) if (x - *first).abs() <= tol => {
                *m += 1;
                *sum += x;
            }
            _ => out.push((x, 1, x)),
        }
    }
    out.into_iter().map(|(_, m, s)| (s / m as f64, m)).collect()
}

/// Maximum total multiplicity accepted by [`characteristic_polynomial`].
pub const CHARPOLY_DEGREE_CAP: usize = 50;

/// Monic `∏(s - λ_i)^{m_i}`, coefficients lowest degree first, from the
/// confluent Vandermonde system `P^{(k)}(λ_i) = 0` for `k < m_i`.
pub fn characteristic_polynomial(groups: &[(f64, usize)]) -> Result<Vec<f64>> {
    let n: usize = groups.iter().map(|g| g.1).sum();
    if n == 0 {
        return Err(Error::Argument("characteristic polynomial of an empty spectrum".into()));
    }
    if n > CHARPOLY_DEGREE_CAP {
        return Err(Error::SizeCap { n, cap: CHARPOLY_DEGREE_CAP });
    }
    // d^k/ds^k s^j at λ.
    let deriv = |j: usize, k: usize, l: f64| -> f64 {
        if k > j {
            return 0.0;
        }
        let falling: f64 = ((j - k + 1)..=j).map(|v| v as f64).product();
        falling * l.powi((j - k) as i32)
    };
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut row = 0;
    for &(l, m) in groups {
        if m == 0 {
            continue;
        }
        for k in 0..m {
            for j in 0..n {
                a[(row, j)] = deriv(j, k, l);
            }
            b[row] = -deriv(n, k, l);
            row += 1;
        }
    }
    let c = a.full_piv_lu().solve(&b).ok_or_else(|| {
        Error::Rank("confluent Vandermonde system is singular; are eigenvalue groups distinct?".into())
    })?;
    let mut out: Vec<f64> = c.iter().copied().collect();
    out.push(1.0);
    Ok(out)
}

/// Monic polynomial with the given roots, by repeated multiplication.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &v) in c.iter().enumerate() {
            next[i + 1] += v;
            next[i] -= r * v;
        }
        c = next;
    }
    c
}

/// Horner evaluation of ascending coefficients.
pub fn poly_eval(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * s + v)
}

/// Roots of the polynomial with ascending coefficients, as eigenvalues of
/// its companion matrix.
pub fn polynomial_roots(c: &[f64]) -> Result<Vec<Complex<f64>>> {
    let deg = c.iter().rposition(|v| *v != 0.0).ok_or_else(|| Error::Argument("zero polynomial".into()))?;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    Ok(comp.complex_eigenvalues().iter().copied().collect())
}

/// `max |φ| / min |φ|` over 1024 points of `[lower, upper]`; infinite when
/// the minimum underflows.
pub fn conditioning_estimate(filter: &FilterSpec, lower: f64, upper: f64) -> Result<f64> {
    const SAMPLES: usize = 1024;
    if !(upper >= lower) {
        return Err(Error::Argument(format!("empty interval [{lower}, {upper}]")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..SAMPLES {
        let s = lower + (upper - lower) * i as f64 / (SAMPLES - 1) as f64;
        let v = filter.try_eval(s)?.abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(if lo < 1e-300 { f64::INFINITY } else { hi / lo })
}

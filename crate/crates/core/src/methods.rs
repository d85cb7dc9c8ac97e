//! Applying a [`FilterSpec`] to a signal with a chosen method.
//!
//! Spectrum-free methods split the filter as `c · s^k · ψ(s)`. Only the
//! smooth factor `ψ` is approximated; positive powers are applied with
//! matrix-vector products and negative powers with pseudo-inverse solves on
//! the complement of the Laplacian kernel, which matches the convention used
//! by the dense oracle for `s⁻ᵏ` filters.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::cheb::{apply_cheb_filter, cheb_coeffs_fast};
use crate::error::{check_len, Error, Result};
use crate::filter::FilterSpec;
use crate::graph::{LaplacianKind, LaplacianPair};
use crate::oracle::{dense_eigen, EigenSystem};
use crate::rational::{
    apply_rational_filter, cheb_rational_coeffs, pade_from_taylor, rational_from_cheb_series, ChebRationalOperator,
    RationalFilter,
};
use crate::sparse::{cg_solve, CgOptions, Preconditioner, SolveReport, SolverConfig};
use crate::spectrum::lambda_max_bound;

/// Default number of terms for the Chebyshev rational series.
pub const DEFAULT_CHEB_RATIONAL_TERMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Dense eigendecomposition, all eigenpairs.
    Oracle,
    /// Dense eigendecomposition keeping the `k` smallest eigenpairs.
    Truncated { k: usize },
    /// Chebyshev polynomial with `coeffs` terms on `[0, λ_max bound]`.
    Cheb { coeffs: usize },
    /// Padé `[r/r]` from Taylor data at 0.
    Pade { order: usize },
    /// Chebyshev–Padé `[r/r]` on `[0, λ_max bound]`.
    ChebPade { order: usize },
    /// Chebyshev rational series with terms `R_0 … R_K`.
    ChebRational { terms: usize },
}

impl Method {
    pub fn needs_eigensystem(&self) -> bool {
        matches!(self, Method::Oracle | Method::Truncated { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Oracle => write!(f, "oracle"),
            Method::Truncated { k } => write!(f, "truncated:{k}"),
            Method::Cheb { coeffs } => write!(f, "cheb:{coeffs}"),
            Method::Pade { order } => write!(f, "pade:{order}"),
            Method::ChebPade { order } => write!(f, "cheb-pade:{order}"),
            Method::ChebRational { terms } => write!(f, "cheb-rational:{terms}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let num = |default: Option<usize>| -> Result<usize> {
            match arg {
                Some(a) => a.parse().map_err(|_| Error::Argument(format!("invalid parameter {a:?} in method {s:?}"))),
                None => default.ok_or_else(|| Error::Argument(format!("method {name:?} needs a parameter"))),
            }
        };
        let m = match name {
            "oracle" => Method::Oracle,
            "truncated" | "eigs" => Method::Truncated { k: num(None)? },
            "cheb" => Method::Cheb { coeffs: num(None)? },
            "pade" => Method::Pade { order: num(Some(7))? },
            "cheb-pade" => Method::ChebPade { order: num(Some(7))? },
            "cheb-rational" => Method::ChebRational { terms: num(Some(DEFAULT_CHEB_RATIONAL_TERMS))? },
            other => return Err(Error::Argument(format!("unknown method {other:?}"))),
        };
        match m {
            Method::Cheb { coeffs: 0 } | Method::Pade { order: 0 } | Method::ChebPade { order: 0 } => {
                Err(Error::Argument(format!("method {s:?} needs a positive parameter")))
            }
            m => Ok(m),
        }
    }
}

/// Result of one filter application.
#[derive(Debug, Clone)]
pub struct Applied {
    pub signal: Vec<f64>,
    /// Reports of the iterative solves that ran, in order.
    pub reports: Vec<SolveReport>,
}

/// Applies filters on one Laplacian, caching the dense eigensystem and the
/// factorizations used by the Chebyshev rational recursion.
pub struct FilterEngine<'a> {
    lap: &'a LaplacianPair,
    config: SolverConfig,
    upper: f64,
    kernel: Vec<Vec<f64>>,
    eigen: OnceLock<EigenSystem>,
    cheb_rational: Mutex<HashMap<u64, Arc<ChebRationalOperator<'a>>>>,
}

impl<'a> FilterEngine<'a> {
    pub fn new(lap: &'a LaplacianPair, config: SolverConfig) -> Self {
        Self {
            lap,
            config,
            upper: lambda_max_bound(lap).max(f64::MIN_POSITIVE),
            kernel: kernel_basis(lap),
            eigen: OnceLock::new(),
            cheb_rational: Mutex::new(HashMap::new()),
        }
    }

    /// Reuses an eigensystem computed elsewhere for the oracle methods.
    pub fn with_eigensystem(self, es: EigenSystem) -> Self {
        let _ = self.eigen.set(es);
        self
    }

    pub fn laplacian(&self) -> &LaplacianPair {
        self.lap
    }

    /// Upper end of the interval that spectrum-free methods approximate on.
    pub fn spectrum_upper(&self) -> f64 {
        self.upper
    }

    pub fn eigensystem(&self) -> Result<&EigenSystem> {
        if let Some(es) = self.eigen.get() {
            return Ok(es);
        }
        let es = dense_eigen(self.lap)?;
        Ok(self.eigen.get_or_init(|| es))
    }

    /// Removes the kernel component in the `M` inner product.
    pub fn project_out_kernel(&self, v: &mut [f64]) {
        let m = self.lap.mass();
        for z in &self.kernel {
            let (num, den) = z
                .iter()
                .zip(v.iter())
                .zip(m)
                .fold((0.0, 0.0), |(a, b), ((zi, vi), mi)| (a + zi * vi * mi, b + zi * zi * mi));
            let c = num / den;
            v.iter_mut().zip(z).for_each(|(vi, zi)| *vi -= c * zi);
        }
    }

    /// `L̃⁺ y`: the solution of `L̃ x = y` with kernel components removed from
    /// both `y` and `x`.
    pub fn pseudo_inverse(&self, y: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        check_len(self.lap.n(), y.len())?;
        let mut b = y.to_vec();
        self.project_out_kernel(&mut b);
        b.iter_mut().zip(self.lap.mass()).for_each(|(v, m)| *v *= m);
        let diag = self.lap.matrix().diagonal();
        let precond = if diag.iter().all(|&d| d > 0.0) { Preconditioner::Jacobi(diag) } else { Preconditioner::None };
        let opts = CgOptions { tol: self.config.tol, max_iter: self.config.max_iter, precond };
        let sol = cg_solve(self.lap.matrix(), &b, &opts)?;
        let report = sol.report;
        let mut x = sol.into_converged()?;
        self.project_out_kernel(&mut x);
        Ok((x, report))
    }

    fn cheb_rational_operator(&self, scale: f64) -> Result<Arc<ChebRationalOperator<'a>>> {
        let mut cache = self.cheb_rational.lock().expect("cache lock poisoned");
        if let Some(op) = cache.get(&scale.to_bits()) {
            return Ok(op.clone());
        }
        let op = Arc::new(ChebRationalOperator::new(self.lap, scale, &self.config)?);
        cache.insert(scale.to_bits(), op.clone());
        Ok(op)
    }

    /// `φ(L̃) f` by `method`.
    pub fn apply(&self, f: &[f64], filter: &FilterSpec, method: Method) -> Result<Applied> {
        check_len(self.lap.n(), f.len())?;
        match method {
            Method::Oracle => Ok(Applied { signal: self.eigensystem()?.apply_filter(f, filter)?, reports: Vec::new() }),
            Method::Truncated { k } => {
                Ok(Applied { signal: self.eigensystem()?.apply_filter_truncated(f, filter, k)?, reports: Vec::new() })
            }
            _ => self.apply_spectrum_free(f, filter, method),
        }
    }

    /// Spectral distance `sqrt(Σ φ(λ_n)² (x_n(p) - x_n(q))²)` by `method`.
    ///
    /// With `h = M⁻¹(δ_p - δ_q)` the eigen-coefficients of `h` are
    /// `x_n(p) - x_n(q)`, so the distance is `‖φ(L̃) h‖_M` and needs one filter
    /// application.
    pub fn distance(&self, filter: &FilterSpec, p: usize, q: usize, method: Method) -> Result<(f64, Vec<SolveReport>)> {
        let n = self.lap.n();
        if p >= n || q >= n {
            return Err(Error::Argument(format!("nodes ({p}, {q}) out of range for {n} nodes")));
        }
        if p == q {
            return Ok((0.0, Vec::new()));
        }
        let m = self.lap.mass();
        let mut h = vec![0.0; n];
        h[p] = 1.0 / m[p];
        h[q] = -1.0 / m[q];
        let out = self.apply(&h, filter, method)?;
        Ok((self.lap.norm(&out.signal), out.reports))
    }

    fn apply_spectrum_free(&self, f: &[f64], filter: &FilterSpec, method: Method) -> Result<Applied> {
        let (c, k, psi) = filter.factorize();
        let mut reports = Vec::new();
        let mut g = f.to_vec();
        if k < 0 {
            self.project_out_kernel(&mut g);
        }
        g = self.apply_smooth(&g, &psi, method, &mut reports)?;
        for _ in 0..k.max(0) {
            g = self.lap.apply(&g)?;
        }
        for _ in 0..(-k).max(0) {
            let (x, rep) = self.pseudo_inverse(&g)?;
            reports.push(rep);
            g = x;
        }
        if c != 1.0 {
            g.iter_mut().for_each(|v| *v *= c);
        }
        Ok(Applied { signal: g, reports })
    }

    /// Rational approximant of `psi` used by the Padé-type methods, or `None`
    /// when `psi` is applied exactly.
    pub fn rational_for(&self, psi: &FilterSpec, method: Method) -> Result<Option<RationalFilter>> {
        match (method, psi) {
            (_, FilterSpec::Identity) => Ok(None),
            (_, FilterSpec::Rational { filter }) => Ok(Some(filter.clone())),
            (_, FilterSpec::Polynomial { coeffs }) => Ok(Some(RationalFilter::monomial(coeffs.clone(), vec![1.0])?)),
            (Method::Pade { order }, _) => {
                let (a, scale) = psi.taylor_data(2 * order).ok_or_else(|| {
                    Error::Argument(format!("pade needs Taylor data, which filter {} does not provide", psi.name()))
                })?;
                Ok(Some(pade_from_taylor(&a, order, order)?.with_scale(scale)))
            }
            (Method::ChebPade { order }, _) => {
                let nodes = (8 * order).max(64);
                let series = cheb_coeffs_fast(|s| psi.try_eval(s).unwrap_or(f64::NAN), nodes, 0.0, self.upper)?;
                // Once the series has decayed below roundoff the denominator
                // block is numerically singular; a lower denominator degree
                // loses nothing there.
                let mut m = order;
                loop {
                    // A near-singular block can also leave a spurious pole
                    // in the interval; that gets the same treatment.
                    let built = rational_from_cheb_series(&series.coeffs, order, m, [0.0, self.upper])
                        .and_then(|rf| rf.check_denominator(self.upper).map(|_| rf));
                    match built {
                        Ok(rf) => return Ok(Some(rf)),
                        Err(e @ (Error::Rank(_) | Error::NotPositiveDefinite { .. })) if m > 0 => {
                            let msg = e.to_string();
                            log::debug!("cheb-pade [{order}/{m}]: {msg}; retrying with denominator degree {}", m - 1);
                            m -= 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            _ => Err(Error::Argument(format!("method {method} does not build rational filters"))),
        }
    }

    fn apply_smooth(
        &self,
        f: &[f64],
        psi: &FilterSpec,
        method: Method,
        reports: &mut Vec<SolveReport>,
    ) -> Result<Vec<f64>> {
        if *psi == FilterSpec::Identity {
            return Ok(f.to_vec());
        }
        if let FilterSpec::Chebyshev { series } = psi {
            return apply_cheb_filter(self.lap, f, series);
        }
        let eval = |s: f64| psi.try_eval(s).unwrap_or(f64::NAN);
        match method {
            Method::Cheb { coeffs } => {
                let series = cheb_coeffs_fast(eval, coeffs, 0.0, self.upper)?;
                apply_cheb_filter(self.lap, f, &series)
            }
            // Polynomials are unbounded on [0, ∞) and have no convergent
            // rational Chebyshev series; explicit rational filters are
            // already in closed form. Both are applied exactly.
            Method::ChebRational { .. }
                if matches!(psi, FilterSpec::Polynomial { .. } | FilterSpec::Rational { .. }) =>
            {
                self.apply_smooth(f, psi, Method::Pade { order: 0 }, reports)
            }
            Method::Pade { .. } | Method::ChebPade { .. } => match self.rational_for(psi, method)? {
                None => Ok(f.to_vec()),
                Some(rf) => {
                    let (g, rep) = apply_rational_filter(self.lap, f, &rf, self.upper, self.config.tol)?;
                    reports.push(rep);
                    Ok(g)
                }
            },
            Method::ChebRational { terms } => {
                let scale = cheb_rational_scale(psi);
                let series = cheb_rational_coeffs(eval, terms, scale)?;
                let op = self.cheb_rational_operator(scale)?;
                let (g, reps) = op.apply(f, &series)?;
                reports.extend(reps);
                Ok(g)
            }
            Method::Oracle | Method::Truncated { .. } => unreachable!("dense methods are handled by apply"),
        }
    }
}

/// Argument scale `c` of the series `Σ F_n R_n(s / c)`. For `exp(-ts)` the
/// choice `c = 8/t` expands `exp(-8x)`, which the basis resolves uniformly
/// well on `[0, ∞)`; other filters use `c = 1`.
pub fn cheb_rational_scale(psi: &FilterSpec) -> f64 {
    match psi {
        FilterSpec::Diffusion { t } if *t > 0.0 => 8.0 / t,
        FilterSpec::Scaled { inner, .. } => cheb_rational_scale(inner),
        _ => 1.0,
    }
}

/// Basis of the kernel of `K`: one vector per connected component of its
/// sparsity graph (indicator vectors, weighted by `√degree` for the
/// symmetric normalization).
fn kernel_basis(lap: &LaplacianPair) -> Vec<Vec<f64>> {
    let n = lap.n();
    let k = lap.matrix();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for (v, w) in k.row(u) {
                if w != 0.0 && comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    let weight = |i: usize| match lap.kind() {
        LaplacianKind::SymmetricNormalized => lap.degrees()[i].max(0.0).sqrt(),
        _ => 1.0,
    };
    (0..count).map(|c| (0..n).map(|i| if comp[i] == c { weight(i) } else { 0.0 }).collect()).collect()
}

//! Rational filters and their spectrum-free application.
//!
//! Two constructions are provided: Padé approximants from Taylor data and
//! Chebyshev–Padé fits from Chebyshev coefficients. A rational filter
//! `P/Q` is applied by solving `Q(L̃) g = P(L̃) f` with matrix-free CG.
//! Independently, a filter on `[0, ∞)` can be expanded in the Chebyshev
//! rational functions `R_n(x) = T_n((x-1)/(x+1))`, whose operator recursion
//! needs one prefactored SPD solve per term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cheb::{cheb_nodes, clenshaw};
use crate::error::{check_len, Error, Result};
use crate::graph::LaplacianPair;
use crate::sparse::{cg_solve, CgOptions, CsrMatrix, FnOperator, Preconditioner, SolveReport, SolverConfig, SpdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    Chebyshev,
}

fn one() -> f64 {
    1.0
}

/// `R(s) = P(x) / Q(x)`.
///
/// In the monomial basis `x = scale · s`. In the Chebyshev basis `x` is `s`
/// mapped affinely from `domain` onto `[-1, 1]` and `P`, `Q` are Chebyshev
/// series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFilter {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub basis: Basis,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

impl RationalFilter {
    pub fn monomial(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let r = Self { p, q, basis: Basis::Monomial, scale: 1.0, domain: None };
        r.validate()?;
        Ok(r)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Degrees `(n, m)`.
    pub fn degree(&self) -> (usize, usize) {
        (self.p.len() - 1, self.q.len() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() || self.q.is_empty() {
            return Err(Error::Validation("rational filter needs numerator and denominator coefficients".into()));
        }
        if self.q[0] != 1.0 {
            return Err(Error::Validation(format!("denominator must be normalized to q0 = 1, got {}", self.q[0])));
        }
        if self.p.iter().chain(&self.q).any(|c| !c.is_finite()) {
            return Err(Error::Validation("rational filter has non-finite coefficients".into()));
        }
        match (self.basis, self.domain) {
            (Basis::Chebyshev, None) => Err(Error::Validation("Chebyshev-basis filter needs a domain".into())),
            (Basis::Chebyshev, Some([lo, hi])) if !(hi > lo) => {
                Err(Error::Validation(format!("empty Chebyshev domain [{lo}, {hi}]")))
            }
            (Basis::Monomial, _) if !(self.scale > 0.0 && self.scale.is_finite()) => {
                Err(Error::Validation(format!("argument scale must be positive, got {}", self.scale)))
            }
            _ => Ok(()),
        }
    }

    fn argument(&self, s: f64) -> f64 {
        match (self.basis, self.domain) {
            (Basis::Chebyshev, Some([lo, hi])) => (2.0 * s - (lo + hi)) / (hi - lo),
            _ => self.scale * s,
        }
    }

    fn poly(&self, c: &[f64], x: f64) -> f64 {
        match self.basis {
            Basis::Monomial => c.iter().rev().fold(0.0, |acc, v| acc * x + v),
            Basis::Chebyshev => clenshaw(c, x),
        }
    }

    pub fn numerator(&self, s: f64) -> f64 {
        self.poly(&self.p, self.argument(s))
    }

    pub fn denominator(&self, s: f64) -> f64 {
        self.poly(&self.q, self.argument(s))
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.numerator(s) / self.denominator(s)
    }

    /// Samples `Q` at 1024 points of `[0, upper]`; a nonpositive value is a
    /// definiteness error since `Q(L̃)` would not be SPD.
    pub fn check_denominator(&self, upper: f64) -> Result<()> {
        const SAMPLES: usize = 1024;
        for i in 0..SAMPLES {
            let s = upper * i as f64 / (SAMPLES - 1) as f64;
            let v = self.denominator(s);
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: v });
            }
        }
        Ok(())
    }
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(b);
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::Rank(format!(
            "{what}: linear system is singular (condition {:.2e}); try lower degrees",
            smax / smin
        )));
    }
    a.full_piv_lu().solve(&b).ok_or_else(|| Error::Rank(format!("{what}: linear system is singular")))
}

/// Padé approximant `[n/m]` from Taylor coefficients `a_0 … a_{n+m}`.
pub fn pade_from_taylor(a: &[f64], n: usize, m: usize) -> Result<RationalFilter> {
    if a.len() < n + m + 1 {
        return Err(Error::Argument(format!(
            "Padé [{n}/{m}] needs {} Taylor coefficients, got {}",
            n + m + 1,
            a.len()
        )));
    }
    let coef = |j: isize| if j < 0 { 0.0 } else { a[j as usize] };
    // Σ_{i=1..m} q_i a_{k-i} = -a_k for k = n+1 … n+m.
    let mat = DMatrix::from_fn(m, m, |r, c| coef((n + 1 + r) as isize - (c + 1) as isize));
    let rhs = DVector::from_fn(m, |r, _| -a[n + 1 + r]);
    let tail = solve_dense(mat, rhs, "Padé")?;
    let mut q = vec![1.0];
    q.extend(tail.iter());
    let p = (0..=n).map(|k| (0..=k.min(m)).map(|i| q[i] * a[k - i]).sum()).collect();
    RationalFilter::monomial(p, q)
}

/// Rational fit `Σ p_k T_k / Σ q_k T_k` to the Chebyshev series `a` on
/// `domain`, matching the first `n + m + 1` Chebyshev coefficients of the
/// linearized residual `A·Q − P`. Needs `a_0 … a_{n+2m}`.
pub fn rational_from_cheb_series(a: &[f64], n: usize, m: usize, domain: [f64; 2]) -> Result<RationalFilter> {
    if a.len() < n + 2 * m + 1 {
        return Err(Error::Argument(format!(
            "Chebyshev-Padé [{n}/{m}] needs {} coefficients, got {}",
            n + 2 * m + 1,
            a.len()
        )));
    }
    let len = n + m + 1;
    // Column k: Chebyshev coefficients of A·T_k, via T_i T_k = (T_{i+k} + T_{|i-k|}) / 2.
    let product = |k: usize| {
        let mut c = vec![0.0; len];
        for (i, &ai) in a.iter().enumerate() {
            if i + k < len {
                c[i + k] += 0.5 * ai;
            }
            let d = i.abs_diff(k);
            if d < len {
                c[d] += 0.5 * ai;
            }
        }
        c
    };
    let cols: Vec<Vec<f64>> = (0..=m).map(product).collect();
    let mat = DMatrix::from_fn(m, m, |r, c| cols[c + 1][n + 1 + r]);
    let rhs = DVector::from_fn(m, |r, _| -cols[0][n + 1 + r]);
    let tail = solve_dense(mat, rhs, "Chebyshev-Padé")?;
    let mut q = vec![1.0];
    q.extend(tail.iter());
    let p = (0..=n).map(|l| (0..=m).map(|k| q[k] * cols[k][l]).sum()).collect();
    let r = RationalFilter { p, q, basis: Basis::Chebyshev, scale: 1.0, domain: Some(domain) };
    r.validate()?;
    Ok(r)
}

/// `R_k(x) = T_k((x-1)/(x+1))` by recursion in `k`.
pub fn cheb_rational_eval(k: usize, x: f64) -> f64 {
    let y = (x - 1.0) / (x + 1.0);
    let (mut r0, mut r1) = (1.0, y);
    if k == 0 {
        return r0;
    }
    for _ in 1..k {
        let r2 = 2.0 * y * r1 - r0;
        r0 = r1;
        r1 = r2;
    }
    r1
}

/// `f(s) ≈ Σ F_n R_n(s / scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebRationalSeries {
    pub coeffs: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

impl ChebRationalSeries {
    pub fn eval(&self, s: f64) -> f64 {
        clenshaw(&self.coeffs, (s - self.scale) / (s + self.scale))
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() || self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("Chebyshev rational series needs finite coefficients".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Validation(format!("series scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Coefficients `F_0 … F_K` of `f(s)` in the basis `R_n(s / scale)`.
///
/// With `y = (x-1)/(x+1)` the weighted product on `[0, ∞)` becomes the
/// Chebyshev-weight integral over `[-1, 1]`, evaluated with
/// `max(64, 8K)`-point Gauss–Chebyshev quadrature.
pub fn cheb_rational_coeffs<F: Fn(f64) -> f64>(f: F, k: usize, scale: f64) -> Result<ChebRationalSeries> {
    if !(scale > 0.0) {
        return Err(Error::Argument(format!("series scale must be positive, got {scale}")));
    }
    let m = 64.max(8 * k);
    let nodes = cheb_nodes(m);
    let samples = nodes
        .iter()
        .map(|&y| {
            let s = scale * (1.0 + y) / (1.0 - y);
            let v = f(s);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteSample { at: s })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let coeffs = (0..=k)
        .map(|n| {
            let sum: f64 = (0..m)
                .map(|j| samples[j] * (n as f64 * std::f64::consts::PI * (2 * j + 1) as f64 / (2 * m) as f64).cos())
                .sum();
            sum * if n == 0 { 1.0 } else { 2.0 } / m as f64
        })
        .collect();
    Ok(ChebRationalSeries { coeffs, scale })
}

/// Applies the polynomial `c` (in the basis of `rf`) of the operator to `f`.
fn apply_poly(lap: &LaplacianPair, rf: &RationalFilter, c: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut tmp = vec![0.0; n];
    match (rf.basis, rf.domain) {
        (Basis::Chebyshev, Some([lo, hi])) => {
            let (scale, shift) = (2.0 / (hi - lo), (hi + lo) / (hi - lo));
            let mut out: Vec<f64> = f.iter().map(|v| c[0] * v).collect();
            if c.len() == 1 {
                return out;
            }
            let mut prev = f.to_vec();
            let mut cur = vec![0.0; n];
            lap.apply_into(f, &mut cur);
            cur.iter_mut().zip(f).for_each(|(x, v)| *x = scale * *x - shift * v);
            out.iter_mut().zip(&cur).for_each(|(o, x)| *o += c[1] * x);
            for &ck in &c[2..] {
                lap.apply_into(&cur, &mut tmp);
                for i in 0..n {
                    prev[i] = 2.0 * (scale * tmp[i] - shift * cur[i]) - prev[i];
                }
                std::mem::swap(&mut prev, &mut cur);
                out.iter_mut().zip(&cur).for_each(|(o, x)| *o += ck * x);
            }
            out
        }
        _ => {
            // Horner in the scaled operator.
            let mut acc: Vec<f64> = f.iter().map(|v| c[c.len() - 1] * v).collect();
            for &ck in c.iter().rev().skip(1) {
                lap.apply_into(&acc, &mut tmp);
                for i in 0..n {
                    acc[i] = rf.scale * tmp[i] + ck * f[i];
                }
            }
            acc
        }
    }
}

/// `g = Q(L̃)⁻¹ P(L̃) f`.
///
/// The solve runs CG on `M · Q(L̃)`, which is symmetric because every power
/// of `L̃ = M⁻¹K` is `M`-self-adjoint, and positive definite once `Q > 0` on
/// the spectrum. `spectrum_upper` bounds that spectrum for the denominator
/// check.
pub fn apply_rational_filter(
    lap: &LaplacianPair,
    f: &[f64],
    rf: &RationalFilter,
    spectrum_upper: f64,
    tol: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    check_len(lap.n(), f.len())?;
    rf.validate()?;
    rf.check_denominator(spectrum_upper)?;
    let mass = lap.mass();
    let mut b = apply_poly(lap, rf, &rf.p, f);
    b.iter_mut().zip(mass).for_each(|(v, m)| *v *= m);
    if rf.q.len() == 1 {
        let x = b.iter().zip(mass).map(|(v, m)| v / (m * rf.q[0])).collect();
        return Ok((x, SolveReport { iterations: 0, residual_norm: 0.0, converged: true }));
    }
    let op = FnOperator::new(lap.n(), |x: &[f64], y: &mut [f64]| {
        let v = apply_poly(lap, rf, &rf.q, x);
        y.iter_mut().zip(v).zip(mass).for_each(|((yi, vi), m)| *yi = vi * m);
    });
    let opts = CgOptions { tol, max_iter: None, precond: Preconditioner::None };
    let sol = cg_solve(&op, &b, &opts)?;
    let report = sol.report;
    Ok((sol.into_converged()?, report))
}

/// Operator recursion for Chebyshev rational series at a fixed scale `c`.
///
/// With `x = L̃ / c`, `R_1(x) f = (K + cM)⁻¹ (K - cM) f`; `K + cM` is SPD for
/// any PSD stiffness and is factored once.
pub struct ChebRationalOperator<'a> {
    lap: &'a LaplacianPair,
    scale: f64,
    solver: SpdSolver,
    rhs_matrix: CsrMatrix,
}

impl<'a> ChebRationalOperator<'a> {
    pub fn new(lap: &'a LaplacianPair, scale: f64, config: &SolverConfig) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Argument(format!("series scale must be positive, got {scale}")));
        }
        let mass = CsrMatrix::from_diagonal(lap.mass());
        let lhs = lap.matrix().linear_combination(1.0, &mass, scale)?;
        let rhs_matrix = lap.matrix().linear_combination(1.0, &mass, -scale)?;
        let solver = SpdSolver::new(lhs, config)?;
        Ok(Self { lap, scale, solver, rhs_matrix })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_direct(&self) -> bool {
        self.solver.is_direct()
    }

    /// `R_1(L̃ / c) v`.
    pub fn step(&self, v: &[f64]) -> Result<(Vec<f64>, Option<SolveReport>)> {
        let b = self.rhs_matrix.spmv(v)?;
        self.solver.solve(&b)
    }

    /// `Σ F_k R_k(L̃ / c) f`; per-step solver reports are returned (empty for
    /// the direct solver).
    pub fn apply(&self, f: &[f64], series: &ChebRationalSeries) -> Result<(Vec<f64>, Vec<SolveReport>)> {
        check_len(self.lap.n(), f.len())?;
        series.validate()?;
        if (series.scale - self.scale).abs() > 1e-12 * self.scale {
            return Err(Error::Argument(format!(
                "series scale {} does not match the factored scale {}",
                series.scale, self.scale
            )));
        }
        let coeffs = &series.coeffs;
        let mut out: Vec<f64> = f.iter().map(|v| coeffs[0] * v).collect();
        let mut reports = Vec::new();
        if coeffs.len() == 1 {
            return Ok((out, reports));
        }
        let mut prev = f.to_vec();
        let (mut cur, rep) = self.step(f).map_err(|e| Error::StepFailed { step: 1, source: Box::new(e) })?;
        reports.extend(rep);
        out.iter_mut().zip(&cur).for_each(|(o, x)| *o += coeffs[1] * x);
        for (k, &ck) in coeffs.iter().enumerate().skip(2) {
            let (g, rep) = self.step(&cur).map_err(|e| Error::StepFailed { step: k, source: Box::new(e) })?;
            reports.extend(rep);
            for i in 0..prev.len() {
                prev[i] = 2.0 * g[i] - prev[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            out.iter_mut().zip(&cur).for_each(|(o, x)| *o += ck * x);
        }
        Ok((out, reports))
    }
}

/// One-shot form of [`ChebRationalOperator::apply`].
pub fn apply_cheb_rational_series(
    lap: &LaplacianPair,
    f: &[f64],
    series: &ChebRationalSeries,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let op = ChebRationalOperator::new(lap, series.scale, config)?;
    Ok(op.apply(f, series)?.0)
}

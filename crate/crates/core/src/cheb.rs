//! Chebyshev polynomials of the first kind and polynomial graph filters.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::LaplacianPair;

/// `Σ a_n T_n(x(s))` where `x` maps `[lower, lambda_max]` affinely onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    pub lambda_max: f64,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub lower: f64,
}

impl ChebSeries {
    /// Series on `[0, lambda_max]`.
    pub fn new(coeffs: Vec<f64>, lambda_max: f64) -> Result<Self> {
        Self::on_interval(coeffs, 0.0, lambda_max)
    }

    pub fn on_interval(coeffs: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        let s = Self { lambda_max: upper, coeffs, lower };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::Validation("Chebyshev series needs at least one coefficient".into()));
        }
        if !(self.lambda_max > self.lower) || !self.lambda_max.is_finite() || !self.lower.is_finite() {
            return Err(Error::Validation(format!(
                "Chebyshev domain [{}, {}] is empty or not finite",
                self.lower, self.lambda_max
            )));
        }
        Ok(())
    }

    pub fn map(&self, s: f64) -> f64 {
        (2.0 * s - (self.lambda_max + self.lower)) / (self.lambda_max - self.lower)
    }

    pub fn in_domain(&self, s: f64) -> bool {
        s >= self.lower && s <= self.lambda_max
    }

    pub fn eval(&self, s: f64) -> f64 {
        clenshaw(&self.coeffs, self.map(s))
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self { coeffs: self.coeffs[..len.min(self.coeffs.len()).max(1)].to_vec(), ..self.clone() }
    }
}

/// Evaluates `series` at `s`. Points outside the domain are still evaluated;
/// check [`ChebSeries::in_domain`] if that matters.
pub fn cheb_eval(series: &ChebSeries, s: f64) -> f64 {
    if !series.in_domain(s) {
        log::debug!("Chebyshev series evaluated outside [{}, {}] at {s}", series.lower, series.lambda_max);
    }
    series.eval(s)
}

/// Clenshaw summation of `Σ a_n T_n(x)`.
pub fn clenshaw(a: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in a.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    a.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// `T_n(x)` by the three-term recursion.
pub fn cheb_t(n: usize, x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    if n == 0 {
        return t0;
    }
    for _ in 1..n {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// Roots of `T_n`: `cos(π(2k+1)/(2n))`, decreasing in `k`.
pub fn cheb_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|k| node_angle(k, n).cos()).collect()
}

fn node_angle(k: usize, n: usize) -> f64 {
    std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64
}

/// Interpolating Chebyshev coefficients of `f` on `[lower, upper]` from its
/// values at the `n` Chebyshev nodes. Exact for polynomials of degree `< n`.
pub fn cheb_coeffs_fast<F: Fn(f64) -> f64>(f: F, n: usize, lower: f64, upper: f64) -> Result<ChebSeries> {
    if n == 0 {
        return Err(Error::Argument("need at least one Chebyshev node".into()));
    }
    let half = 0.5 * (upper - lower);
    let mid = 0.5 * (upper + lower);
    let samples = (0..n)
        .map(|k| {
            let s = mid + half * node_angle(k, n).cos();
            let v = f(s);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteSample { at: s })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // T_i(x_k) = cos(i θ_k); the sum is a DCT-II, small enough to do directly.
    let coeffs = (0..n)
        .map(|i| {
            let sum: f64 = samples.iter().enumerate().map(|(k, v)| v * (i as f64 * node_angle(k, n)).cos()).sum();
            sum * if i == 0 { 1.0 } else { 2.0 } / n as f64
        })
        .collect();
    ChebSeries::on_interval(coeffs, lower, upper)
}

/// `Σ a_k T_k(X) f` with `X` the affinely mapped operator of `lap`, using
/// matrix-vector products only.
///
/// The series domain must contain the spectrum of `lap`; use a bound such as
/// [`crate::spectrum::lambda_max_bound`] for `lambda_max`.
pub fn apply_cheb_filter(lap: &LaplacianPair, f: &[f64], series: &ChebSeries) -> Result<Vec<f64>> {
    let n = lap.n();
    check_len(n, f.len())?;
    series.validate()?;
    let a = &series.coeffs;
    let scale = 2.0 / (series.lambda_max - series.lower);
    let shift = (series.lambda_max + series.lower) / (series.lambda_max - series.lower);
    let mut out: Vec<f64> = f.iter().map(|v| a[0] * v).collect();
    if a.len() == 1 {
        return Ok(out);
    }
    let mut prev = f.to_vec();
    let mut cur = vec![0.0; n];
    lap.apply_into(f, &mut cur);
    for (c, v) in cur.iter_mut().zip(f) {
        *c = scale * *c - shift * v;
    }
    for (o, c) in out.iter_mut().zip(&cur) {
        *o += a[1] * c;
    }
    let mut tmp = vec![0.0; n];
    for &ak in &a[2..] {
        lap.apply_into(&cur, &mut tmp);
        for i in 0..n {
            let next = 2.0 * (scale * tmp[i] - shift * cur[i]) - prev[i];
            prev[i] = next;
        }
        std::mem::swap(&mut prev, &mut cur);
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += ak * c;
        }
    }
    Ok(out)
}

//! Dense generalized eigendecomposition and exact spectral operators.
//!
//! For a pair `(K, M)` the eigenvectors are `M`-orthonormal, `XᵀMX = I`,
//! and a filter acts as `K_φ = X φ(Λ) Xᵀ M`. Everything here is `O(n³)` and
//! meant as ground truth for small graphs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::filter::{FilterSpec, TabulatedFilter};
use crate::graph::LaplacianPair;

pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    mass: Vec<f64>,
}

/// Eigenpairs of `lap` with the default size cap.
pub fn dense_eigen(lap: &LaplacianPair) -> Result<EigenSystem> {
    dense_eigen_capped(lap, DEFAULT_DENSE_CAP)
}

pub fn dense_eigen_capped(lap: &LaplacianPair, cap: usize) -> Result<EigenSystem> {
    let n = lap.n();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    let s: Vec<f64> = lap.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let k = lap.matrix().to_dense();
    let mut c = DMatrix::from_fn(n, n, |i, j| s[i] * k[(i, j)] * s[j]);
    // Symmetrize away rounding so the symmetric solver sees exact symmetry.
    c = (&c + c.transpose()) * 0.5;
    EigenSystem::from_symmetric(c, &s, lap.mass().to_vec())
}

/// `SymmetricEigen` can leave residuals around `1e-9 ‖C‖`; a few Jacobi
/// sweeps on the nearly diagonal `VᵀCV` bring them to roundoff.
fn refined_eigen(c: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = c.nrows();
    let eig = SymmetricEigen::new(c.clone());
    let mut v = eig.eigenvectors;
    let mut a = v.tr_mul(&(&c * &v));
    let norm = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * 1e-2 * norm;
    for _ in 0..8 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= tiny {
                    continue;
                }
                rotated = true;
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a.diagonal().iter().copied().collect(), v)
}

impl EigenSystem {
    fn from_symmetric(c: DMatrix<f64>, inv_sqrt_mass: &[f64], mass: Vec<f64>) -> Result<Self> {
        let n = c.nrows();
        let (values, basis) = refined_eigen(c);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues = order.iter().map(|&i| values[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, j| inv_sqrt_mass[r] * basis[(r, order[j])]);
        Ok(Self { eigenvalues, vectors, mass })
    }

    /// Eigendecomposition of a dense symmetric matrix with identity mass.
    pub fn from_dense_symmetric(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_len(n, a.ncols())?;
        let c = (a + a.transpose()) * 0.5;
        Self::from_symmetric(c, &vec![1.0; n], vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Eigenvalues at or below this are treated as zero by pseudo-inverse filters.
    pub fn zero_tolerance(&self) -> f64 {
        1e-9 * self.lambda_max().abs().max(1.0)
    }

    /// `max |XᵀMX - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mx = DMatrix::from_fn(self.n(), self.n(), |r, c| self.mass[r] * self.vectors[(r, c)]);
        let g = self.vectors.transpose() * mx;
        (g - DMatrix::identity(self.n(), self.n())).abs().max()
    }

    /// `max |K X - M X Λ|` for the pair the system was built from.
    pub fn residual(&self, lap: &LaplacianPair) -> f64 {
        let k = lap.matrix().to_dense();
        let kx = k * &self.vectors;
        let mut worst = 0.0f64;
        for j in 0..self.n() {
            for r in 0..self.n() {
                let v = kx[(r, j)] - self.mass[r] * self.vectors[(r, j)] * self.eigenvalues[j];
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// `⟨f, x_n⟩_M` for every eigenvector.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), f.len())?;
        let mf = DVector::from_iterator(self.n(), f.iter().zip(&self.mass).map(|(a, m)| a * m));
        Ok((self.vectors.tr_mul(&mf)).iter().copied().collect())
    }

    /// `Σ c_n x_n`.
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), c.len())?;
        Ok((&self.vectors * DVector::from_column_slice(c)).iter().copied().collect())
    }

    /// `φ(λ_n)` for the first `k` eigenvalues.
    pub fn filter_values(&self, filter: &FilterSpec, k: usize) -> Result<Vec<f64>> {
        let tol = self.zero_tolerance();
        self.eigenvalues[..k.min(self.n())].iter().map(|&l| filter.spectral_value(l, tol)).collect()
    }

    /// `Σ_{n ≤ k} φ(λ_n) ⟨f, x_n⟩_M x_n`.
    pub fn apply_filter_truncated(&self, f: &[f64], filter: &FilterSpec, k: usize) -> Result<Vec<f64>> {
        if k > self.n() {
            return Err(Error::Argument(format!("cannot keep {k} of {} eigenpairs", self.n())));
        }
        let phi = self.filter_values(filter, k)?;
        let mut c = self.coefficients(f)?;
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = if i < k { *ci * phi[i] } else { 0.0 };
        }
        self.synthesize(&c)
    }

    pub fn apply_filter(&self, f: &[f64], filter: &FilterSpec) -> Result<Vec<f64>> {
        self.apply_filter_truncated(f, filter, self.n())
    }

    /// `K_φ = X φ(Λ) Xᵀ M`.
    pub fn spectral_kernel_matrix(&self, filter: &FilterSpec) -> Result<DMatrix<f64>> {
        let phi = self.filter_values(filter, self.n())?;
        let n = self.n();
        let xphi = DMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * phi[c]);
        let xm = DMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * self.mass[r]);
        Ok(xphi * xm.transpose())
    }

    /// Spectral convolution: eigen-coefficients multiply pointwise.
    pub fn convolution(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let a = self.coefficients(f)?;
        let b = self.coefficients(g)?;
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        self.synthesize(&c)
    }

    /// `K_φ δ_p = Σ φ(λ_n) x_n(p) M_p x_n`.
    pub fn spectral_wavelet(&self, filter: &FilterSpec, p: usize) -> Result<Vec<f64>> {
        if p >= self.n() {
            return Err(Error::Argument(format!("node {p} out of range for {} nodes", self.n())));
        }
        let mut delta = vec![0.0; self.n()];
        delta[p] = 1.0;
        self.apply_filter(&delta, filter)
    }

    /// `sqrt(Σ φ(λ_n)² (x_n(p) - x_n(q))²)`.
    pub fn spectral_distance(&self, filter: &FilterSpec, p: usize, q: usize) -> Result<f64> {
        let n = self.n();
        if p >= n || q >= n {
            return Err(Error::Argument(format!("nodes ({p}, {q}) out of range for {n} nodes")));
        }
        let phi = self.filter_values(filter, n)?;
        let d2: f64 = (0..n).map(|j| (phi[j] * (self.vectors[(p, j)] - self.vectors[(q, j)])).powi(2)).sum();
        Ok(d2.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumPart {
    Real,
    Imaginary,
}

/// Uniform grid `s_j = -S + j · 2S / N`, `j = 0 … N-1`, symmetric about 0
/// in the sense that it contains `0` and `-S`.
pub fn symmetric_grid(n: usize, half_width: f64) -> Vec<f64> {
    let h = 2.0 * half_width / n as f64;
    (0..n).map(|j| -half_width + j as f64 * h).collect()
}

/// Default Fourier grid: 4096 samples over `[-8σ, 8σ]`.
pub fn default_fourier_grid(sigma: f64) -> Vec<f64> {
    symmetric_grid(4096, 8.0 * sigma)
}

/// Fourier transform of a filter sampled on [`symmetric_grid`].
///
/// Approximates `φ̂(ω) = ∫ φ(s) e^{-iωs} ds` at the angular frequencies
/// `ω_k = 2πk / (N h)`, `k = -N/2 … N/2-1`, and returns the selected part
/// as a tabulated filter over those frequencies. Evaluating it at an
/// eigenvalue outside the frequency range is an extrapolation error.
pub fn fourier_based_filter(samples: &[f64], half_width: f64, part: SpectrumPart) -> Result<FilterSpec> {
    fourier_based_filter_padded(samples, half_width, part, 1)
}

/// As [`fourier_based_filter`], with the samples zero-padded to `pad` times
/// their length. The frequency spacing shrinks by `pad`, and with it the
/// linear interpolation error between frequencies; the filter is taken to
/// vanish outside the tabulation window.
pub fn fourier_based_filter_padded(
    samples: &[f64],
    half_width: f64,
    part: SpectrumPart,
    pad: usize,
) -> Result<FilterSpec> {
    let n = samples.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Argument(format!("Fourier sample count must be a power of two, got {n}")));
    }
    if !(half_width > 0.0) {
        return Err(Error::Argument(format!("grid half-width must be positive, got {half_width}")));
    }
    if pad == 0 || !pad.is_power_of_two() {
        return Err(Error::Argument(format!("padding factor must be a power of two, got {pad}")));
    }
    let h = 2.0 * half_width / n as f64;
    let len = n * pad;
    // Place s = 0 at index 0 so the transform carries no phase.
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (j, &v) in samples.iter().enumerate() {
        let idx = (j as isize - (n / 2) as isize).rem_euclid(len as isize) as usize;
        buf[idx] = Complex::new(v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mut grid = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    for i in 0..len {
        let k = i as isize - (len / 2) as isize;
        let v = buf[k.rem_euclid(len as isize) as usize] * h;
        grid.push(2.0 * std::f64::consts::PI * k as f64 / (len as f64 * h));
        values.push(match part {
            SpectrumPart::Real => v.re,
            SpectrumPart::Imaginary => v.im,
        });
    }
    Ok(FilterSpec::Tabulated { table: TabulatedFilter::new(grid, values)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, path_graph, LaplacianKind};

    fn k2() -> EigenSystem {
        dense_eigen(&laplacian(&path_graph(2), LaplacianKind::Combinatorial).unwrap()).unwrap()
    }

    #[test]
    fn k2_eigenpairs() {
        let es = k2();
        assert!(es.eigenvalues()[0].abs() < 1e-14 && (es.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let h = 0.5f64.sqrt();
        let v = es.vectors();
        assert!((v[(0, 0)].abs() - h).abs() < 1e-14 && (v[(0, 0)] - v[(1, 0)]).abs() < 1e-14);
        assert!((v[(0, 1)].abs() - h).abs() < 1e-14 && (v[(0, 1)] + v[(1, 1)]).abs() < 1e-14);
    }

    #[test]
    fn p3_matches_characteristic_cubic() {
        // det(L - s I) = -s (s - 1)(s - 3) for the unit path on three nodes.
        let es = dense_eigen(&laplacian(&path_graph(3), LaplacianKind::Combinatorial).unwrap()).unwrap();
        for (got, want) in es.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_weighted_orthonormality() {
        let g = crate::graph::random_connected_graph(25, 30, 3);
        let lap = laplacian(&g, LaplacianKind::RandomWalk).unwrap();
        let es = dense_eigen(&lap).unwrap();
        assert!(es.orthonormality_error() < 1e-8);
        assert!(es.residual(&lap) < 1e-8 * lap.matrix().norm_inf());
        assert!(es.eigenvalues()[0] >= -1e-10);
        assert!(es.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn size_cap() {
        let lap = laplacian(&path_graph(5), LaplacianKind::Combinatorial).unwrap();
        assert!(matches!(dense_eigen_capped(&lap, 4), Err(Error::SizeCap { n: 5, cap: 4 })));
    }

    #[test]
    fn k2_closed_forms() {
        let es = k2();
        let t: f64 = 0.5;
        let d = es.apply_filter(&[1.0, 0.0], &FilterSpec::diffusion(t)).unwrap();
        let e = (-2.0 * t).exp();
        assert!((d[0] - (1.0 + e) / 2.0).abs() < 1e-14 && (d[1] - (1.0 - e) / 2.0).abs() < 1e-14);
        assert!((d[0] - 0.6839397).abs() < 1e-7);
        let c = es.apply_filter(&[1.0, 0.0], &FilterSpec::commute_time()).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-14 && (c[1] + 0.25).abs() < 1e-14);
        let w = es.spectral_wavelet(&FilterSpec::diffusion(t), 0).unwrap();
        assert!((w[1] - 0.3160603).abs() < 1e-7);
        let dist = es.spectral_distance(&FilterSpec::commute_time(), 0, 1).unwrap();
        assert!((dist * dist - 0.5).abs() < 1e-14);
        assert_eq!(es.spectral_distance(&FilterSpec::commute_time(), 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn kernel_matrix_forms() {
        let es = k2();
        let k = es.spectral_kernel_matrix(&FilterSpec::Identity).unwrap();
        assert!((k - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        let z = es.spectral_kernel_matrix(&FilterSpec::Polynomial { coeffs: vec![0.0] }).unwrap();
        assert_eq!(z.abs().max(), 0.0);
        let d = es.spectral_kernel_matrix(&FilterSpec::diffusion(0.5)).unwrap();
        assert!((d[(0, 1)] - 0.3161).abs() < 5e-5 && (d[(1, 1)] - 0.6839).abs() < 5e-5);
    }

    #[test]
    fn truncation_and_singular_filters() {
        let es = k2();
        let f = [0.3, 0.9];
        assert!(es.apply_filter_truncated(&f, &FilterSpec::Identity, 3).is_err());
        let one = es.apply_filter_truncated(&f, &FilterSpec::Identity, 1).unwrap();
        assert!((one[0] - 0.6).abs() < 1e-14 && (one[1] - 0.6).abs() < 1e-14);
        let bad = FilterSpec::Polynomial { coeffs: vec![f64::INFINITY] };
        assert!(matches!(es.apply_filter(&f, &bad), Err(Error::SingularFilter { .. })));
    }

    #[test]
    fn fourier_of_gaussian_is_real() {
        let sigma = 0.5;
        let grid = default_fourier_grid(sigma);
        let samples: Vec<f64> = grid.iter().map(|s| (-s * s / (2.0 * sigma * sigma)).exp()).collect();
        let FilterSpec::Tabulated { table } =
            fourier_based_filter(&samples, 8.0 * sigma, SpectrumPart::Imaginary).unwrap()
        else {
            panic!()
        };
        assert!(table.values.iter().all(|v| v.abs() <= 1e-10));
        let exact = |w: f64| sigma * (2.0 * std::f64::consts::PI).sqrt() * (-sigma * sigma * w * w / 2.0).exp();
        let re = fourier_based_filter(&samples, 8.0 * sigma, SpectrumPart::Real).unwrap();
        let FilterSpec::Tabulated { table } = &re else { panic!() };
        // On the frequency grid the trapezoid transform is spectrally accurate.
        for (w, v) in table.grid.iter().zip(&table.values).filter(|(w, _)| w.abs() < 10.0) {
            assert!((v - exact(*w)).abs() < 1e-10, "{w}");
        }
        // Between frequencies linear interpolation costs at most
        // Δω²/8 · max|φ̂''| = Δω²/8 · σ³√(2π).
        let dw = table.grid[1] - table.grid[0];
        let bound = dw * dw / 8.0 * sigma.powi(3) * (2.0 * std::f64::consts::PI).sqrt();
        let padded = fourier_based_filter_padded(&samples, 8.0 * sigma, SpectrumPart::Real, 64).unwrap();
        for w in [0.3, 1.0, 2.5] {
            assert!((re.try_eval(w).unwrap() - exact(w)).abs() <= bound, "{w}");
            assert!((padded.try_eval(w).unwrap() - exact(w)).abs() <= bound / 4096.0 + 1e-12, "{w}");
        }
    }

    #[test]
    fn fourier_of_spike_has_flat_magnitude() {
        let n = 64;
        let mut samples = vec![0.0; n];
        samples[n / 2] = 1.0;
        let re = fourier_based_filter(&samples, 1.0, SpectrumPart::Real).unwrap();
        let im = fourier_based_filter(&samples, 1.0, SpectrumPart::Imaginary).unwrap();
        let (FilterSpec::Tabulated { table: a }, FilterSpec::Tabulated { table: b }) = (re, im) else { panic!() };
        let mags: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x.hypot(*y)).collect();
        assert!(mags.iter().all(|m| (m - mags[0]).abs() < 1e-14));
        assert!(matches!(a.eval(1e6), Err(Error::Extrapolation { .. })));
        assert!(fourier_based_filter(&[0.0; 6], 1.0, SpectrumPart::Real).is_err());
    }
}

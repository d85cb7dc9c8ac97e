//! One-dimensional spectral filters `φ(s)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cheb::ChebSeries;
use crate::error::{Error, Result};
use crate::rational::RationalFilter;

/// Piecewise linear filter on a sorted grid. Evaluation outside the grid is
/// an error rather than an extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFilter {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl TabulatedFilter {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if grid.len() < 2 {
            return Err(Error::Validation("a tabulated filter needs at least two samples".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("tabulation grid must be strictly increasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (lo, hi) = (self.grid[0], *self.grid.last().expect("non-empty"));
        if !(s >= lo && s <= hi) {
            return Err(Error::Extrapolation { value: s, lo, hi });
        }
        let j = self.grid.partition_point(|&g| g <= s).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        let u = (s - x0) / (x1 - x0);
        Ok(self.values[j - 1] * (1.0 - u) + self.values[j] * u)
    }

    /// Reads `s,value` rows; a non-numeric first line is taken as a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(s), Ok(v)) => {
                    grid.push(s);
                    values.push(v);
                }
                _ if grid.is_empty() && i == 0 => continue,
                _ => return Err(Error::Parse { line: i + 1, message: format!("expected 's,value', got {line:?}") }),
            }
        }
        Self::new(grid, values)
    }
}

/// A filter as data.
///
/// `InversePower` is singular at 0; wherever it is applied to a spectrum the
/// zero eigenvalues are skipped (pseudo-inverse convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterSpec {
    Identity,
    /// `s^{-power}`; power 1 is the commute-time kernel, 2 the biharmonic.
    InversePower {
        power: u32,
    },
    /// `exp(-t s)`.
    Diffusion {
        t: f64,
    },
    /// `s exp(-t s)`.
    MexicanHat {
        t: f64,
    },
    /// Monomial coefficients, lowest degree first.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Chebyshev {
        series: ChebSeries,
    },
    Rational {
        filter: RationalFilter,
    },
    Tabulated {
        table: TabulatedFilter,
    },
    Scaled {
        factor: f64,
        inner: Box<FilterSpec>,
    },
}

impl FilterSpec {
    pub fn commute_time() -> Self {
        Self::InversePower { power: 1 }
    }
    pub fn biharmonic() -> Self {
        Self::InversePower { power: 2 }
    }
    pub fn diffusion(t: f64) -> Self {
        Self::Diffusion { t }
    }
    pub fn mexican_hat(t: f64) -> Self {
        Self::MexicanHat { t }
    }
    pub fn scaled(self, factor: f64) -> Self {
        Self::Scaled { factor, inner: Box::new(self) }
    }

    /// Parses `identity`, `commute-time`, `biharmonic`, `inverse:K`,
    /// `diffusion:T`, `mexican:T`, `polynomial:C0,C1,...`, and the file-backed
    /// forms `custom-rational:FILE`, `chebyshev:FILE` (both JSON) and
    /// `tabulated:FILE` (CSV). A scale may be omitted for `diffusion` and
    /// `mexican` when it is supplied later through [`FilterSpec::at_scale`];
    /// it then defaults to 1.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (spec, None),
        };
        let number = |what: &str| -> Result<Option<f64>> {
            arg.map(|a| {
                a.parse::<f64>().map_err(|_| Error::Argument(format!("invalid {what} {a:?} in filter {spec:?}")))
            })
            .transpose()
        };
        let path = || arg.ok_or_else(|| Error::Argument(format!("filter {name:?} needs a file argument")));
        let f = match name {
            "identity" => Self::Identity,
            "commute-time" | "harmonic" => Self::commute_time(),
            "biharmonic" => Self::biharmonic(),
            "inverse" => {
                let k = number("power")?.unwrap_or(1.0);
                if k < 1.0 || k.fract() != 0.0 {
                    return Err(Error::Argument(format!("inverse power must be a positive integer, got {k}")));
                }
                Self::InversePower { power: k as u32 }
            }
            "diffusion" | "heat" => Self::Diffusion { t: number("scale")?.unwrap_or(1.0) },
            "mexican" | "mexican-hat" => Self::MexicanHat { t: number("scale")?.unwrap_or(1.0) },
            "polynomial" => {
                let a = arg.ok_or_else(|| Error::Argument("polynomial filter needs coefficients".into()))?;
                let coeffs = a
                    .split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Argument(format!("invalid coefficient {c:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                Self::Polynomial { coeffs }
            }
            "custom-rational" | "rational" => {
                let filter: RationalFilter = serde_json::from_str(&std::fs::read_to_string(path()?)?)?;
                filter.validate()?;
                Self::Rational { filter }
            }
            "chebyshev" => {
                let series: ChebSeries = serde_json::from_str(&std::fs::read_to_string(path()?)?)?;
                series.validate()?;
                Self::Chebyshev { series }
            }
            "tabulated" => {
                Self::Tabulated { table: TabulatedFilter::parse_csv(&std::fs::read_to_string(Path::new(path()?))?)? }
            }
            other => return Err(Error::Argument(format!("unknown filter {other:?}"))),
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Diffusion { t } | Self::MexicanHat { t } if !(*t >= 0.0 && t.is_finite()) => {
                Err(Error::Argument(format!("filter scale must be finite and nonnegative, got {t}")))
            }
            Self::Scaled { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Same family at scale `t`; only meaningful for the scale-parameterized
    /// filters.
    pub fn at_scale(&self, t: f64) -> Result<Self> {
        let f = match self {
            Self::Diffusion { .. } => Self::Diffusion { t },
            Self::MexicanHat { .. } => Self::MexicanHat { t },
            Self::Scaled { factor, inner } => Self::Scaled { factor: *factor, inner: Box::new(inner.at_scale(t)?) },
            other => return Err(Error::Argument(format!("filter {} has no scale parameter", other.name()))),
        };
        f.validate()?;
        Ok(f)
    }

    /// Short identifier used in reports and file names.
    pub fn name(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::InversePower { power: 1 } => "commute-time".into(),
            Self::InversePower { power: 2 } => "biharmonic".into(),
            Self::InversePower { power } => format!("inverse:{power}"),
            Self::Diffusion { t } => format!("diffusion:{t}"),
            Self::MexicanHat { t } => format!("mexican:{t}"),
            Self::Polynomial { coeffs } => format!("polynomial:{}", coeffs.len().saturating_sub(1)),
            Self::Chebyshev { series } => format!("chebyshev:{}", series.coeffs.len()),
            Self::Rational { filter } => format!("rational:{},{}", filter.p.len() - 1, filter.q.len() - 1),
            Self::Tabulated { .. } => "tabulated".into(),
            Self::Scaled { factor, inner } => format!("{factor}*{}", inner.name()),
        }
    }

    /// Whether zero eigenvalues are dropped when the filter is applied.
    pub fn is_pseudo_inverse(&self) -> bool {
        match self {
            Self::InversePower { .. } => true,
            Self::Scaled { inner, .. } => inner.is_pseudo_inverse(),
            _ => false,
        }
    }

    /// `φ(s)`, with no pseudo-inverse convention: `s^{-k}` at 0 is infinite.
    pub fn try_eval(&self, s: f64) -> Result<f64> {
        Ok(match self {
            Self::Identity => 1.0,
            Self::InversePower { power } => s.powi(-(*power as i32)),
            Self::Diffusion { t } => (-t * s).exp(),
            Self::MexicanHat { t } => s * (-t * s).exp(),
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            Self::Chebyshev { series } => series.eval(s),
            Self::Rational { filter } => filter.eval(s),
            Self::Tabulated { table } => table.eval(s)?,
            Self::Scaled { factor, inner } => factor * inner.try_eval(s)?,
        })
    }

    /// `φ(s)`, panicking on tabulation range errors. Intended for analytic filters.
    pub fn eval(&self, s: f64) -> f64 {
        self.try_eval(s).expect("filter evaluation failed")
    }

    /// Value used when the filter acts on eigenvalue `lambda`: zero for
    /// pseudo-inverse filters when `|lambda| <= zero_tol`, an error when the
    /// value is not finite.
    pub fn spectral_value(&self, lambda: f64, zero_tol: f64) -> Result<f64> {
        if self.is_pseudo_inverse() && lambda.abs() <= zero_tol {
            return Ok(0.0);
        }
        let v = self.try_eval(lambda)?;
        if !v.is_finite() {
            return Err(Error::SingularFilter { lambda });
        }
        Ok(v)
    }

    /// Splits `φ(s) = c · s^k · ψ(s)` with `ψ` finite at 0, so that
    /// spectrum-free methods only approximate the smooth factor `ψ` and
    /// apply the power exactly. Returns `(c, k, ψ)`.
    pub fn factorize(&self) -> (f64, i32, FilterSpec) {
        match self {
            Self::InversePower { power } => (1.0, -(*power as i32), Self::Identity),
            Self::MexicanHat { t } => (1.0, 1, Self::Diffusion { t: *t }),
            Self::Scaled { factor, inner } => {
                let (c, k, psi) = inner.factorize();
                (factor * c, k, psi)
            }
            other => (1.0, 0, other.clone()),
        }
    }

    /// Taylor coefficients at 0 of `φ(s / scale)` up to `order`, when known in
    /// closed form, together with `scale`. Diffusion uses `scale = 1/t` so
    /// the coefficients are those of `exp(-θ)`.
    pub fn taylor_data(&self, order: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            Self::Identity => {
                let mut a = vec![0.0; order + 1];
                a[0] = 1.0;
                Some((a, 1.0))
            }
            Self::Diffusion { t } if *t > 0.0 => {
                let mut a = Vec::with_capacity(order + 1);
                let mut term = 1.0;
                for k in 0..=order {
                    a.push(term);
                    term *= -1.0 / (k + 1) as f64;
                }
                Some((a, *t))
            }
            Self::Diffusion { .. } => FilterSpec::Identity.taylor_data(order),
            Self::Polynomial { coeffs } => {
                let mut a = coeffs.clone();
                a.resize(order.max(coeffs.len().saturating_sub(1)) + 1, 0.0);
                Some((a, 1.0))
            }
            Self::Scaled { factor, inner } => {
                inner.taylor_data(order).map(|(a, s)| (a.into_iter().map(|v| v * factor).collect(), s))
            }
            _ => None,
        }
    }
}

//! Stationary covariance functions: the Matérn family and its exponential and
//! Gaussian members, geometric anisotropy, and a nonnegative-definiteness check.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::kernel::KernelMatrix;
use crate::linalg;
use crate::location::Location;
use crate::special::ln_bessel_k_scaled;

/// Scaled distances beyond this are treated as exact zero correlation.
pub const UNDERFLOW_DISTANCE: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicParams {
    pub variance: f64,
    pub range: f64,
    pub smoothness: f64,
}

impl IsotropicParams {
    pub fn new(variance: f64, range: f64, smoothness: f64) -> Result<Self> {
        let p = Self {
            variance,
            range,
            smoothness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("variance", self.variance)?;
        check_positive("range", self.range)?;
        check_positive("smoothness", self.smoothness)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

fn check_lag(h: f64) -> Result<()> {
    if h >= 0.0 && !h.is_nan() {
        Ok(())
    } else {
        domain(format!("distance must be nonnegative, got {h}"))
    }
}

/// Matérn correlation at unit range: `x^k K_k(x) / (Gamma(k) 2^(k-1))`.
pub fn matern_correlation(x: f64, smoothness: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x > UNDERFLOW_DISTANCE || x.is_infinite() {
        return 0.0;
    }
    let log = smoothness * x.ln() + ln_bessel_k_scaled(smoothness, x)
        - x
        - ln_gamma(smoothness)
        - (smoothness - 1.0) * std::f64::consts::LN_2;
    log.exp().min(1.0)
}

/// Matérn covariance `M_k(h)`; returns the variance at `h = 0`.
pub fn matern(h: f64, p: &IsotropicParams) -> Result<f64> {
    p.validate()?;
    check_lag(h)?;
    if h == 0.0 {
        return Ok(p.variance);
    }
    Ok(p.variance * matern_correlation(h / p.range, p.smoothness))
}

pub fn exponential(h: f64, variance: f64, range: f64) -> Result<f64> {
    check_positive("variance", variance)?;
    check_positive("range", range)?;
    check_lag(h)?;
    Ok(variance * (-h / range).exp())
}

/// Gaussian covariance `variance * exp(-(h/range)^2)`.
pub fn gaussian(h: f64, variance: f64, range: f64) -> Result<f64> {
    check_positive("variance", variance)?;
    check_positive("range", range)?;
    check_lag(h)?;
    let x = h / range;
    Ok(variance * (-x * x).exp())
}

/// Isotropic correlation function of unit range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Correlation {
    Exponential,
    Gaussian,
    Matern { smoothness: f64 },
}

impl Correlation {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Correlation::Exponential => (-r).exp(),
            Correlation::Gaussian => (-r * r).exp(),
            Correlation::Matern { smoothness } => matern_correlation(r, *smoothness),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Correlation::Matern { smoothness } => check_positive("smoothness", *smoothness),
            _ => Ok(()),
        }
    }
}

/// Anisotropy matrix `A` of `C(h) = C0(||A^{-1/2} h||)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnisotropyMatrix(KernelMatrix);

impl AnisotropyMatrix {
    pub fn new(m: KernelMatrix) -> Result<Self> {
        m.validate()?;
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(KernelMatrix::from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self(KernelMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &KernelMatrix {
        &self.0
    }
}

/// `sqrt(h' A^{-1} h)` via a triangular solve against the Cholesky factor of `A`.
pub fn aniso_distance(h: &[f64], a: &AnisotropyMatrix) -> Result<f64> {
    if h.len() != a.0.dim() {
        return Err(Error::Shape(format!(
            "lag has {} components but anisotropy matrix is {}x{}",
            h.len(),
            a.0.dim(),
            a.0.dim()
        )));
    }
    let lag = [h[0], if h.len() > 1 { h[1] } else { 0.0 }];
    Ok(a.0.cholesky().quad_inv(&lag).sqrt())
}

/// Stationary covariance `variance * g(d(h) / range)` where `d` is the
/// Euclidean or anisotropic lag length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarySpec {
    pub variance: f64,
    pub range: f64,
    pub correlation: Correlation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anisotropy: Option<AnisotropyMatrix>,
}

impl StationarySpec {
    pub fn isotropic(variance: f64, range: f64, correlation: Correlation) -> Self {
        Self {
            variance,
            range,
            correlation,
            anisotropy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return domain(format!("variance must be nonnegative, got {}", self.variance));
        }
        check_positive("range", self.range)?;
        self.correlation.validate()
    }

    pub fn scaled_distance(&self, s: &Location, t: &Location) -> f64 {
        let lag = s.lag(t);
        let d = match &self.anisotropy {
            Some(a) => a.0.cholesky().quad_inv(&lag).sqrt(),
            None => (lag[0] * lag[0] + lag[1] * lag[1]).sqrt(),
        };
        d / self.range
    }

    pub fn covariance(&self, s: &Location, t: &Location) -> f64 {
        if s == t {
            return self.variance;
        }
        self.variance * self.correlation.eval(self.scaled_distance(s, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NndReport {
    pub nonnegative: bool,
    pub min_eigenvalue: f64,
}

/// Nonnegative definiteness: passes iff the smallest eigenvalue is at least
/// `-tol * max(diag)`.
pub fn nnd_check(c: &DMatrix<f64>, tol: f64) -> Result<NndReport> {
    linalg::require_symmetric(c, 1e-10)?;
    if c.nrows() == 0 {
        return Ok(NndReport {
            nonnegative: true,
            min_eigenvalue: 0.0,
        });
    }
    let max_diag = c.diagonal().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sym = 0.5 * (c + c.transpose());
    let min_eigenvalue = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(NndReport {
        nonnegative: min_eigenvalue >= -tol * max_diag.max(0.0),
        min_eigenvalue,
    })
}

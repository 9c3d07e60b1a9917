//! Closed-form nonstationary covariances built from spatially-varying Gaussian
//! kernel matrices.
//!
//! All three share the averaged kernel matrix `(Σ(s) + Σ(s'))/2`, from which the
//! scaled squared distance `Q(s, s')` and the determinant prefactor are computed
//! through one 2x2 Cholesky factorization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::{KernelField, KernelMatrix, ScalarField};
use crate::location::Location;
use crate::stationary::{matern_correlation, Correlation};

/// `Q(s, s') = (s - s')' [(Σ(s) + Σ(s'))/2]^{-1} (s - s')`.
pub fn q_distance(s: &Location, t: &Location, ks: &KernelMatrix, kt: &KernelMatrix) -> f64 {
    if s == t {
        return 0.0;
    }
    ks.average(kt).cholesky().quad_inv(&s.lag(t))
}

fn norm_constant(dim: usize) -> f64 {
    (2.0 * PI.sqrt()).powi(-(dim as i32))
}

/// Exact convolution `∫ K_s(u) K_s'(u) du` of two Gaussian kernel densities
/// with covariance matrices `ks` and `kt`:
/// `(2√π)^{-d} |avg|^{-1/2} exp(-Q/4)`.
pub fn cov_h(s: &Location, t: &Location, ks: &KernelMatrix, kt: &KernelMatrix) -> f64 {
    cov_ps_with(s, t, ks, kt, |r| (-0.25 * r * r).exp())
}

/// `(2√π)^{-d} |avg|^{-1/2} g(√Q)` for a unit-range isotropic correlation `g`.
pub fn cov_ps(s: &Location, t: &Location, ks: &KernelMatrix, kt: &KernelMatrix, g: &Correlation) -> f64 {
    cov_ps_with(s, t, ks, kt, |r| g.eval(r))
}

pub fn cov_ps_with(
    s: &Location,
    t: &Location,
    ks: &KernelMatrix,
    kt: &KernelMatrix,
    g: impl Fn(f64) -> f64,
) -> f64 {
    let ch = ks.average(kt).cholesky();
    let pref = norm_constant(s.dim()) * (-0.5 * ch.log_det()).exp();
    if s == t {
        return pref * g(0.0);
    }
    pref * g(ch.quad_inv(&s.lag(t)).sqrt())
}

/// Correlation family of the nonstationary covariance. Matérn smoothness may
/// vary in space; the pair smoothness is the average of the two sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NsCorrelation {
    Exponential,
    Gaussian,
    Matern { smoothness: ScalarField },
}

impl NsCorrelation {
    pub fn matern(smoothness: f64) -> Self {
        NsCorrelation::Matern {
            smoothness: ScalarField::constant(smoothness),
        }
    }

    /// The equivalent stationary correlation when smoothness is constant.
    pub fn as_stationary(&self) -> Option<Correlation> {
        match self {
            NsCorrelation::Exponential => Some(Correlation::Exponential),
            NsCorrelation::Gaussian => Some(Correlation::Gaussian),
            NsCorrelation::Matern {
                smoothness: ScalarField::Constant { value },
            } => Some(Correlation::Matern { smoothness: *value }),
            NsCorrelation::Matern { .. } => None,
        }
    }
}

/// Parameters of the nonstationary covariance evaluated at one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteParams {
    pub sigma: f64,
    pub kernel: KernelMatrix,
    pub smoothness: f64,
    log_det: f64,
}

impl SiteParams {
    pub fn new(sigma: f64, kernel: KernelMatrix, smoothness: f64) -> Self {
        Self {
            sigma,
            kernel,
            smoothness,
            log_det: kernel.log_det(),
        }
    }
}

/// Nonstationary covariance with spatially-varying standard deviation σ(·),
/// kernel matrix Σ(·) and, for Matérn, smoothness κ(·).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonstationarySpec {
    pub sigma: ScalarField,
    pub kernel: KernelField,
    pub correlation: NsCorrelation,
}

impl NonstationarySpec {
    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        self.kernel.validate()?;
        if let NsCorrelation::Matern { smoothness } = &self.correlation {
            smoothness.validate()?;
        }
        Ok(())
    }

    pub fn needs_covariates(&self) -> bool {
        self.sigma.needs_covariates()
            || self.kernel.needs_covariates()
            || matches!(&self.correlation, NsCorrelation::Matern { smoothness } if smoothness.needs_covariates())
    }

    pub fn site(&self, s: &Location, covariates: &[f64]) -> Result<SiteParams> {
        let sigma = self.sigma.eval(s, covariates)?;
        let kernel = self.kernel.eval(s, covariates)?;
        let smoothness = match &self.correlation {
            NsCorrelation::Matern { smoothness } => smoothness.eval(s, covariates)?,
            _ => 0.0,
        };
        Ok(SiteParams::new(sigma, kernel, smoothness))
    }

    pub fn covariance(&self, s: &Location, t: &Location, a: &SiteParams, b: &SiteParams) -> f64 {
        cov_ns(s, t, a, b, &self.correlation)
    }
}

/// `σ(s)σ(s') |Σ(s)|^{1/4} |Σ(s')|^{1/4} / |avg|^{1/2} · g(√Q)`.
///
/// Coincident sites skip `g` and return `σ(s)σ(s')`, which is `σ²(s)` on the diagonal.
pub fn cov_ns(s: &Location, t: &Location, a: &SiteParams, b: &SiteParams, g: &NsCorrelation) -> f64 {
    if s == t {
        return a.sigma * b.sigma;
    }
    let ch = a.kernel.average(&b.kernel).cholesky();
    let log_pref = 0.25 * a.log_det + 0.25 * b.log_det - 0.5 * ch.log_det();
    let r = ch.quad_inv(&s.lag(t)).sqrt();
    let corr = match g {
        NsCorrelation::Exponential => (-r).exp(),
        NsCorrelation::Gaussian => (-r * r).exp(),
        NsCorrelation::Matern { .. } => matern_correlation(r, 0.5 * (a.smoothness + b.smoothness)),
    };
    a.sigma * b.sigma * log_pref.exp() * corr
}

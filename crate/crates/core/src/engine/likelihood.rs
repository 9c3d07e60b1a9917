use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::dataset::SpatialDataset;
use super::trend::{gls, Trend, TrendKind};
use crate::covariance::{build_cov_matrix, CovarianceSpec};
use crate::error::{domain, Result};
use crate::linalg::{cholesky_jittered, Factor};

/// `C + τ² I` at the observed locations.
pub fn observation_cov(data: &SpatialDataset, spec: &CovarianceSpec, nugget: f64) -> Result<DMatrix<f64>> {
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return domain(format!("nugget must be nonnegative, got {nugget}"));
    }
    let mut c = build_cov_matrix(spec, &data.locations, data.covariates())?;
    for i in 0..c.nrows() {
        c[(i, i)] += nugget;
    }
    Ok(c)
}

/// Gaussian log-density of residual `r` under the factorized covariance.
pub fn gaussian_log_density(factor: &Factor, log_det: f64, r: &DVector<f64>) -> f64 {
    let n = r.len() as f64;
    let z = factor.chol.l_dirty().solve_lower_triangular(r).expect("triangular factor is nonsingular");
    -0.5 * n * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * z.norm_squared()
}

fn residual(data: &SpatialDataset, y: &[f64], trend: &Trend) -> DVector<f64> {
    DVector::from_iterator(
        y.len(),
        y.iter().zip(&data.locations).map(|(v, s)| v - trend.mean(s)),
    )
}

/// Gaussian log-likelihood summed over replicates, via Cholesky.
pub fn log_likelihood(data: &SpatialDataset, spec: &CovarianceSpec, nugget: f64, trend: &Trend) -> Result<f64> {
    data.validate()?;
    trend.validate(data.dim())?;
    let k = observation_cov(data, spec, nugget)?;
    let factor = cholesky_jittered(&k, "observation covariance")?;
    let ld = factor.log_det();
    Ok(data
        .values
        .iter()
        .map(|y| gaussian_log_density(&factor, ld, &residual(data, y, trend)))
        .sum())
}

/// Log-likelihood with the trend coefficients replaced by their GLS estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Profiled {
    pub log_likelihood: f64,
    pub trend: Trend,
}

pub fn profile_log_likelihood(
    data: &SpatialDataset,
    spec: &CovarianceSpec,
    nugget: f64,
    kind: TrendKind,
) -> Result<Profiled> {
    let k = observation_cov(data, spec, nugget)?;
    let factor = cholesky_jittered(&k, "observation covariance")?;
    let x = kind.design(&data.locations);
    let (coefficients, _) = gls(&factor, &x, &data.values)?;
    let trend = Trend { kind, coefficients };
    let ld = factor.log_det();
    let log_likelihood = data
        .values
        .iter()
        .map(|y| gaussian_log_density(&factor, ld, &residual(data, y, &trend)))
        .sum();
    Ok(Profiled { log_likelihood, trend })
}

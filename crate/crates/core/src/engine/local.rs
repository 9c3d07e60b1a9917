//! Two-stage fitting of mixture kernel fields: local anisotropic fits around
//! each basis location, then a global fit with those kernels frozen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::SpatialDataset;
use super::fit::{fit_mle, FitOptions, ModelFit, ModelTemplate};
use super::trend::TrendKind;
use crate::covariance::CovarianceSpec;
use crate::error::{domain, Error, Result};
use crate::kernel::{KernelField, KernelMatrix, ScalarField};
use crate::location::Location;
use crate::nonstationary::{NonstationarySpec, NsCorrelation};
use crate::stationary::Correlation;

/// Fewest observations a neighbourhood may hold.
pub const MIN_LOCAL_POINTS: usize = 10;

/// Result of the local fit around one basis location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub center: Location,
    /// `A` of the local model `σ² exp(-h'A^{-1}h)`, used directly as the basis kernel.
    pub kernel: KernelMatrix,
    pub variance: f64,
    pub nugget: f64,
    pub n_points: usize,
    pub log_likelihood: f64,
}

fn neighbourhoods(data: &SpatialDataset, basis: &[Location], radius: f64) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return domain(format!("local radius must be positive, got {radius}"));
    }
    if basis.is_empty() {
        return domain("at least one basis location is required");
    }
    let r2 = radius * radius;
    basis
        .iter()
        .enumerate()
        .map(|(m, b)| {
            let idx: Vec<usize> = (0..data.len())
                .filter(|&i| data.locations[i].distance_squared(b) <= r2)
                .collect();
            if idx.len() < MIN_LOCAL_POINTS {
                return Err(Error::InsufficientData {
                    index: m,
                    count: idx.len(),
                    required: MIN_LOCAL_POINTS,
                });
            }
            Ok(idx)
        })
        .collect()
}

/// Local maximum-likelihood fits of `σ² exp(-h'A^{-1}h) + τ² 1{h=0}` with a
/// constant mean to the data within `radius` of each basis location.
pub fn estimate_local_fits(
    data: &SpatialDataset,
    basis: &[Location],
    radius: f64,
    options: &FitOptions,
) -> Result<Vec<LocalFit>> {
    data.validate()?;
    let hoods = neighbourhoods(data, basis, radius)?;
    let diam = data.diameter();
    hoods
        .par_iter()
        .zip(basis)
        .map(|(idx, b)| {
            let local = data.subset(idx);
            let mut t = ModelTemplate::anisotropic(&local, Correlation::Gaussian);
            // kernel start from the global, not the local, diameter
            if let CovarianceSpec::Stationary(s) = &mut t.spec {
                let e = (0.1 * diam).powi(2);
                let a = if data.dim() == 1 {
                    KernelMatrix::scalar(e)?
                } else {
                    KernelMatrix::diagonal(e, e)?
                };
                s.anisotropy = Some(crate::stationary::AnisotropyMatrix::new(a)?);
            }
            let fit = fit_mle(&local, &t, options)?;
            let CovarianceSpec::Stationary(s) = &fit.spec else {
                unreachable!("local template is stationary")
            };
            Ok(LocalFit {
                center: *b,
                kernel: *s.anisotropy.as_ref().expect("anisotropic template").matrix(),
                variance: s.variance,
                nugget: fit.nugget,
                n_points: idx.len(),
                log_likelihood: fit.log_likelihood,
            })
        })
        .collect()
}

pub fn estimate_local_kernels(
    data: &SpatialDataset,
    basis: &[Location],
    radius: f64,
    options: &FitOptions,
) -> Result<Vec<KernelMatrix>> {
    Ok(estimate_local_fits(data, basis, radius, options)?
        .into_iter()
        .map(|f| f.kernel)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOptions {
    pub fit: FitOptions,
    /// Mixture bandwidth; half the smallest basis spacing when absent.
    pub bandwidth: Option<f64>,
    pub correlation: NsCorrelation,
    pub trend: TrendKind,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            bandwidth: None,
            correlation: NsCorrelation::Gaussian,
            trend: TrendKind::Constant,
        }
    }
}

/// Stage 1 estimates one kernel per basis location; stage 2 fits σ, the
/// nugget, the trend and, for Matérn, the smoothness, with those kernels frozen.
pub fn fit_two_stage(
    data: &SpatialDataset,
    basis: &[Location],
    radius: f64,
    options: &TwoStageOptions,
) -> Result<ModelFit> {
    let local = estimate_local_fits(data, basis, radius, &options.fit)?;
    let n = local.len() as f64;
    let variance = local.iter().map(|f| f.variance).sum::<f64>() / n;
    let nugget = local.iter().map(|f| f.nugget).sum::<f64>() / n;
    let kernel = KernelField::mixture(
        basis.to_vec(),
        local.iter().map(|f| f.kernel).collect(),
        options.bandwidth,
    )?;
    let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
        sigma: ScalarField::constant(variance.sqrt()),
        kernel,
        correlation: options.correlation.clone(),
    });
    let template = ModelTemplate::new(spec, nugget.max(1e-6 * variance), options.trend).fix("kernel*");
    fit_mle(data, &template, &options.fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::location::regular_grid;

    #[test]
    fn sparse_neighbourhood_names_basis_index() {
        let locs = regular_grid(0.0, 1.0, 0.0, 1.0, 5, 5);
        let d = SpatialDataset::single(locs, vec![0.0; 25]).unwrap();
        let basis = [Location::xy(0.5, 0.5), Location::xy(5.0, 5.0)];
        match estimate_local_kernels(&d, &basis, 0.8, &FitOptions::default()) {
            Err(Error::InsufficientData { index, count, required }) => {
                assert_eq!((index, count, required), (1, 0, 10));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_radius_rejected() {
        let locs = regular_grid(0.0, 1.0, 0.0, 1.0, 5, 5);
        let d = SpatialDataset::single(locs, vec![0.0; 25]).unwrap();
        assert!(matches!(
            estimate_local_kernels(&d, &[Location::xy(0.5, 0.5)], 0.0, &FitOptions::default()),
            Err(Error::Domain(_))
        ));
    }
}

//! Tagged covariance-model descriptions and covariance-matrix assembly.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::KlSpec;
use crate::convolution::{weighted_convolution_cov, DiscreteConvolutionSpec, FuentesSpec};
use crate::error::{Error, Result};
use crate::kernel::{KernelField, KernelMatrix};
use crate::location::Location;
use crate::nonstationary::{cov_h, cov_ps, NonstationarySpec, SiteParams};
use crate::stationary::{Correlation, StationarySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CovarianceSpec {
    Stationary(StationarySpec),
    /// Exact Gaussian-kernel convolution with a spatially-varying kernel matrix.
    Higdon { kernel: KernelField },
    /// Kernel-matrix prefactor with an arbitrary unit-range correlation.
    PaciorekSchervish { kernel: KernelField, correlation: Correlation },
    Nonstationary(NonstationarySpec),
    Fuentes(FuentesSpec),
    DiscreteConvolution(DiscreteConvolutionSpec),
    KarhunenLoeve(KlSpec),
}

/// Per-location quantities computed once before pairwise assembly.
#[derive(Clone, Debug)]
enum Site {
    Plain,
    Kernel(KernelMatrix),
    Ns(SiteParams),
    Weights(Vec<f64>),
    Index(usize),
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceSpec::Stationary(s) => s.validate(),
            CovarianceSpec::Higdon { kernel } => kernel.validate(),
            CovarianceSpec::PaciorekSchervish { kernel, correlation } => {
                kernel.validate()?;
                correlation.validate()
            }
            CovarianceSpec::Nonstationary(ns) => ns.validate(),
            CovarianceSpec::Fuentes(f) => f.validate(),
            CovarianceSpec::DiscreteConvolution(d) => {
                d.kernel.validate()?;
                d.grid.validate()
            }
            CovarianceSpec::KarhunenLoeve(k) => k.validate(),
        }
    }

    pub fn needs_covariates(&self) -> bool {
        match self {
            CovarianceSpec::Higdon { kernel } | CovarianceSpec::PaciorekSchervish { kernel, .. } => {
                kernel.needs_covariates()
            }
            CovarianceSpec::Nonstationary(ns) => ns.needs_covariates(),
            CovarianceSpec::DiscreteConvolution(d) => d.kernel.needs_covariates(),
            _ => false,
        }
    }

    /// The kernel field, for families that have one.
    pub fn kernel_field(&self) -> Option<&KernelField> {
        match self {
            CovarianceSpec::Higdon { kernel } | CovarianceSpec::PaciorekSchervish { kernel, .. } => Some(kernel),
            CovarianceSpec::Nonstationary(ns) => Some(&ns.kernel),
            CovarianceSpec::DiscreteConvolution(d) => Some(&d.kernel),
            _ => None,
        }
    }

    fn site(&self, s: &Location, x: &[f64]) -> Result<Site> {
        Ok(match self {
            CovarianceSpec::Stationary(_) => Site::Plain,
            CovarianceSpec::Higdon { kernel } | CovarianceSpec::PaciorekSchervish { kernel, .. } => {
                Site::Kernel(kernel.eval(s, x)?)
            }
            CovarianceSpec::Nonstationary(ns) => Site::Ns(ns.site(s, x)?),
            CovarianceSpec::Fuentes(f) => Site::Weights(f.weights(s)),
            CovarianceSpec::DiscreteConvolution(d) => {
                Site::Weights(crate::convolution::kernel_weights(&d.kernel, &d.grid, s, x)?)
            }
            CovarianceSpec::KarhunenLoeve(k) => Site::Index(
                k.index_of(s)
                    .ok_or_else(|| Error::Input(format!("location {:?} is not in the EOF basis", s.coords())))?,
            ),
        })
    }

    fn sites(&self, locs: &[Location], covariates: Option<&[Vec<f64>]>) -> Result<Vec<Site>> {
        self.validate()?;
        let needs = self.needs_covariates();
        locs.iter()
            .enumerate()
            .map(|(i, s)| {
                let x: &[f64] = match covariates.and_then(|c| c.get(i)) {
                    Some(v) => v,
                    None if needs => return Err(Error::MissingCovariate { index: i }),
                    None => &[],
                };
                if !s.is_finite() {
                    return Err(Error::FieldEvaluation {
                        index: i,
                        source: Box::new(Error::Domain("location is not finite".into())),
                    });
                }
                self.site(s, x).map_err(|e| match e {
                    Error::Input(_) if needs => Error::MissingCovariate { index: i },
                    e => Error::FieldEvaluation {
                        index: i,
                        source: Box::new(e),
                    },
                })
            })
            .collect()
    }

    fn pair(&self, s: &Location, t: &Location, a: &Site, b: &Site) -> f64 {
        match (self, a, b) {
            (CovarianceSpec::Stationary(st), _, _) => st.covariance(s, t),
            (CovarianceSpec::Higdon { .. }, Site::Kernel(ka), Site::Kernel(kb)) => cov_h(s, t, ka, kb),
            (CovarianceSpec::PaciorekSchervish { correlation, .. }, Site::Kernel(ka), Site::Kernel(kb)) => {
                cov_ps(s, t, ka, kb, correlation)
            }
            (CovarianceSpec::Nonstationary(ns), Site::Ns(pa), Site::Ns(pb)) => ns.covariance(s, t, pa, pb),
            (CovarianceSpec::Fuentes(f), Site::Weights(wa), Site::Weights(wb)) => f.covariance_weighted(s, t, wa, wb),
            (CovarianceSpec::DiscreteConvolution(d), Site::Weights(wa), Site::Weights(wb)) => {
                weighted_convolution_cov(wa, wb, d.grid.noise_variance)
            }
            (CovarianceSpec::KarhunenLoeve(k), Site::Index(i), Site::Index(j)) => k.entry(*i, *j),
            _ => unreachable!("site data does not match covariance family"),
        }
    }

    /// Covariance between two single locations without covariates.
    pub fn covariance(&self, s: &Location, t: &Location) -> Result<f64> {
        let a = self.sites(std::slice::from_ref(s), None)?;
        let b = self.sites(std::slice::from_ref(t), None)?;
        Ok(self.pair(s, t, &a[0], &b[0]))
    }
}

/// Pairwise covariance matrix. Only the upper triangle is evaluated and then
/// mirrored, so the result is exactly symmetric and independent of scheduling.
pub fn build_cov_matrix(spec: &CovarianceSpec, locs: &[Location], covariates: Option<&[Vec<f64>]>) -> Result<DMatrix<f64>> {
    let sites = spec.sites(locs, covariates)?;
    let n = locs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.pair(&locs[i], &locs[j], &sites[i], &sites[j])).collect())
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            m[(i, i + k)] = v;
            m[(i + k, i)] = v;
        }
    }
    Ok(m)
}

/// `C(a_i, b_j)` for two location sets.
pub fn cross_cov_matrix(
    spec: &CovarianceSpec,
    a: &[Location],
    a_covariates: Option<&[Vec<f64>]>,
    b: &[Location],
    b_covariates: Option<&[Vec<f64>]>,
) -> Result<DMatrix<f64>> {
    let sa = spec.sites(a, a_covariates)?;
    let sb = spec.sites(b, b_covariates)?;
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| (0..b.len()).map(|j| spec.pair(&a[i], &b[j], &sa[i], &sb[j])).collect())
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Pointwise variances `C(s, s)`.
pub fn variances(spec: &CovarianceSpec, locs: &[Location], covariates: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
    let sites = spec.sites(locs, covariates)?;
    Ok(locs
        .iter()
        .zip(&sites)
        .map(|(s, a)| spec.pair(s, s, a, a))
        .collect())
}

/// Local kernel ellipse at one location.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub location: Location,
    pub eigenvalue1: f64,
    pub eigenvalue2: f64,
    pub angle: f64,
    /// Pointwise standard deviation `sqrt(C(s, s))`.
    pub sigma: f64,
    pub smoothness: Option<f64>,
}

/// The kernel matrix in force at `s`: Σ(s) for kernel-field families, `A` or
/// `range² I` for stationary ones.
fn local_kernel(spec: &CovarianceSpec, s: &Location, x: &[f64]) -> Result<KernelMatrix> {
    match spec {
        CovarianceSpec::Stationary(st) => match &st.anisotropy {
            Some(a) => Ok(a.matrix().scaled(st.range * st.range)),
            None => Ok(KernelMatrix::identity(s.dim()).scaled(st.range * st.range)),
        },
        _ => match spec.kernel_field() {
            Some(k) => k.eval(s, x),
            None => Err(Error::Input("this covariance family has no kernel field to draw".into())),
        },
    }
}

fn local_smoothness(spec: &CovarianceSpec, s: &Location, x: &[f64]) -> Result<Option<f64>> {
    use crate::nonstationary::NsCorrelation;
    Ok(match spec {
        CovarianceSpec::Stationary(StationarySpec {
            correlation: Correlation::Matern { smoothness },
            ..
        })
        | CovarianceSpec::PaciorekSchervish {
            correlation: Correlation::Matern { smoothness },
            ..
        } => Some(*smoothness),
        CovarianceSpec::Nonstationary(ns) => match &ns.correlation {
            NsCorrelation::Matern { smoothness } => Some(smoothness.eval(s, x)?),
            _ => None,
        },
        _ => None,
    })
}

/// Ellipse parameters of the local kernel at each location.
pub fn ellipse_field(spec: &CovarianceSpec, locs: &[Location], covariates: Option<&[Vec<f64>]>) -> Result<Vec<Ellipse>> {
    let var = variances(spec, locs, covariates)?;
    locs.iter()
        .enumerate()
        .map(|(i, s)| {
            let x = covariates.and_then(|c| c.get(i)).map(|v| v.as_slice()).unwrap_or(&[]);
            let wrap = |e| Error::FieldEvaluation {
                index: i,
                source: Box::new(e),
            };
            let sp = local_kernel(spec, s, x).map_err(wrap)?.to_spectral();
            Ok(Ellipse {
                location: *s,
                eigenvalue1: sp.eigenvalue1,
                eigenvalue2: sp.eigenvalue2,
                angle: sp.angle,
                sigma: var[i].max(0.0).sqrt(),
                smoothness: local_smoothness(spec, s, x).map_err(wrap)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{CovariateLink, ScalarField};
    use crate::nonstationary::NsCorrelation;

    #[test]
    fn one_location_gives_variance() {
        let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
            sigma: ScalarField::constant(1.5),
            kernel: KernelField::constant(KernelMatrix::identity(2)),
            correlation: NsCorrelation::Exponential,
        });
        let m = build_cov_matrix(&spec, &[Location::xy(0.3, 0.3)], None).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert_eq!(m[(0, 0)], 2.25);
    }

    #[test]
    fn missing_covariates_name_the_location() {
        let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
            sigma: ScalarField::Covariate {
                log_value: CovariateLink {
                    intercept: 0.0,
                    coefficients: vec![1.0],
                },
            },
            kernel: KernelField::constant(KernelMatrix::identity(2)),
            correlation: NsCorrelation::Gaussian,
        });
        let locs = [Location::xy(0.0, 0.0), Location::xy(1.0, 0.0)];
        assert!(matches!(
            build_cov_matrix(&spec, &locs, None),
            Err(Error::MissingCovariate { index: 0 })
        ));
        let covs = vec![vec![0.1], vec![]];
        assert!(matches!(
            build_cov_matrix(&spec, &locs, Some(&covs)),
            Err(Error::MissingCovariate { index: 1 })
        ));
    }

    #[test]
    fn serde_round_trip_preserves_spec() {
        let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
            sigma: ScalarField::constant(0.7),
            kernel: KernelField::mixture(
                vec![Location::xy(0.0, 0.0), Location::xy(1.0, 1.0)],
                vec![
                    KernelMatrix::from_spectral(0.1, 0.01, 0.4).unwrap(),
                    KernelMatrix::from_spectral(0.2, 0.05, 2.4).unwrap(),
                ],
                None,
            )
            .unwrap(),
            correlation: NsCorrelation::matern(1.5),
        });
        let text = serde_json::to_string(&spec).unwrap();
        let back: CovarianceSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}

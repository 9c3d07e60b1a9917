use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dataset::SpatialDataset;
use super::fit::ModelFit;
use super::likelihood::observation_cov;
use super::trend::gls;
use crate::covariance::{cross_cov_matrix, variances};
use crate::error::{Error, Result};
use crate::linalg::cholesky_jittered;
use crate::location::Location;

/// Predictive means and standard errors of the latent process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub locations: Vec<Location>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Universal kriging of replicate 0 of `data`.
pub fn krige(fit: &ModelFit, data: &SpatialDataset, query: &[Location]) -> Result<PredictionResult> {
    krige_with(fit, data, query, None, 0)
}

/// Universal kriging of replicate `replicate`, with covariates at the query
/// locations for covariate-driven fields.
///
/// The trend coefficients are re-estimated by GLS from the data and their
/// uncertainty is added to the predictive variance.
pub fn krige_with(
    fit: &ModelFit,
    data: &SpatialDataset,
    query: &[Location],
    query_covariates: Option<&[Vec<f64>]>,
    replicate: usize,
) -> Result<PredictionResult> {
    data.validate()?;
    let y = data
        .values
        .get(replicate)
        .ok_or_else(|| Error::Input(format!("replicate {replicate} not in data")))?;
    let k = observation_cov(data, &fit.spec, fit.nugget)?;
    let factor = cholesky_jittered(&k, "observation covariance")?;
    let kind = fit.trend.kind;
    let x = kind.design(&data.locations);
    let (beta, xf) = gls(&factor, &x, std::slice::from_ref(y))?;
    let beta = DVector::from_vec(beta);

    let cq = cross_cov_matrix(&fit.spec, &data.locations, data.covariates(), query, query_covariates)?;
    let vq = variances(&fit.spec, query, query_covariates)?;
    let resid = DVector::from_column_slice(y) - &x * &beta;
    let w = factor.chol.solve(&resid);
    let kc = factor.chol.solve(&cq);
    let xq = kind.design(query);

    let mut mean = Vec::with_capacity(query.len());
    let mut se = Vec::with_capacity(query.len());
    for q in 0..query.len() {
        let c = cq.column(q);
        let m = xq.row(q).dot(&beta.transpose()) + c.dot(&w);
        let mut var = vq[q] - c.dot(&kc.column(q));
        if let Some(xf) = &xf {
            // x_q - X' K^{-1} c_q
            let u: DVector<f64> = xq.row(q).transpose() - x.transpose() * kc.column(q);
            var += u.dot(&xf.chol.solve(&u));
        }
        mean.push(m);
        se.push(var.max(0.0).sqrt());
    }
    Ok(PredictionResult {
        locations: query.to_vec(),
        mean,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::engine::trend::TrendKind;
    use crate::stationary::{Correlation, StationarySpec};

    fn exp_spec(var: f64, range: f64) -> CovarianceSpec {
        CovarianceSpec::Stationary(StationarySpec::isotropic(var, range, Correlation::Exponential))
    }

    fn transect() -> SpatialDataset {
        let locs: Vec<Location> = (0..6).map(|i| Location::xy(0.4 * i as f64, 0.0)).collect();
        SpatialDataset::single(locs, vec![0.3, 1.1, -0.2, 0.5, 0.9, -1.0]).unwrap()
    }

    #[test]
    fn one_observation_hand_formula() {
        let d = SpatialDataset::single(vec![Location::xy(0.0, 0.0)], vec![1.7]).unwrap();
        let (var, range, tau2) = (2.0, 0.5, 0.3);
        let fit = ModelFit::fixed(&d, exp_spec(var, range), tau2, TrendKind::Zero).unwrap();
        let q = Location::xy(0.3, 0.4);
        let c = var * (-0.5f64 / range).exp();
        let p = krige(&fit, &d, &[q]).unwrap();
        assert!((p.mean[0] - c * 1.7 / (var + tau2)).abs() < 1e-14);
        assert!((p.se[0] - (var - c * c / (var + tau2)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn interpolates_without_nugget() {
        let d = transect();
        for kind in [TrendKind::Zero, TrendKind::Constant, TrendKind::Linear] {
            let fit = ModelFit::fixed(&d, exp_spec(1.0, 0.7), 0.0, kind);
            // linear trend in y is singular on a transect
            let Ok(fit) = fit else { continue };
            let p = krige(&fit, &d, &d.locations).unwrap();
            for i in 0..d.len() {
                assert!((p.mean[i] - d.values[0][i]).abs() < 1e-10);
                assert!(p.se[i] <= 1e-6);
            }
        }
    }

    #[test]
    fn far_query_reverts_to_trend() {
        let d = transect();
        let fit = ModelFit::fixed(&d, exp_spec(1.5, 0.2), 0.1, TrendKind::Zero).unwrap();
        let p = krige(&fit, &d, &[Location::xy(1e4, 1e4)]).unwrap();
        assert_eq!(p.mean[0], 0.0);
        assert!((p.se[0] - 1.5f64.sqrt()).abs() < 1e-15);

        let fit = ModelFit::fixed(&d, exp_spec(1.5, 0.2), 0.1, TrendKind::Constant).unwrap();
        let p = krige(&fit, &d, &[Location::xy(1e4, 1e4)]).unwrap();
        assert!((p.mean[0] - fit.trend.coefficients[0]).abs() < 1e-14);
        // plus the GLS variance of the mean, 1/(1'K^{-1}1)
        let k = crate::engine::likelihood::observation_cov(&d, &fit.spec, 0.1).unwrap();
        let one = nalgebra::DVector::from_element(d.len(), 1.0);
        let gls_var = 1.0 / one.dot(&k.cholesky().unwrap().solve(&one));
        assert!((p.se[0] - (1.5 + gls_var).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn se_smaller_at_sites_than_between() {
        let d = transect();
        let fit = ModelFit::fixed(&d, exp_spec(1.0, 0.5), 0.05, TrendKind::Constant).unwrap();
        let mut q = Vec::new();
        for i in 0..5 {
            q.push(d.locations[i]);
            q.push(Location::xy(0.4 * i as f64 + 0.2, 0.0));
        }
        let p = krige(&fit, &d, &q).unwrap();
        for i in 0..5 {
            assert!(p.se[2 * i] <= p.se[2 * i + 1]);
            assert!(p.se[2 * i] >= 0.0);
        }
    }

    #[test]
    fn missing_query_covariates_is_an_input_error() {
        use crate::kernel::{CovariateLink, KernelField, KernelMatrix, ScalarField};
        use crate::nonstationary::{NonstationarySpec, NsCorrelation};
        let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
            sigma: ScalarField::Covariate {
                log_value: CovariateLink {
                    intercept: 0.0,
                    coefficients: vec![0.5],
                },
            },
            kernel: KernelField::constant(KernelMatrix::identity(2)),
            correlation: NsCorrelation::Exponential,
        });
        let mut d = transect();
        d.covariates = Some((0..6).map(|i| vec![0.1 * i as f64]).collect());
        let fit = ModelFit::fixed(&d, spec, 0.1, TrendKind::Zero).unwrap();
        let err = krige(&fit, &d, &[Location::xy(0.1, 0.1)]).unwrap_err();
        assert!(matches!(err, Error::MissingCovariate { index: 0 }));
        assert_eq!(err.class(), crate::error::ErrorClass::Input);
        let ok = krige_with(&fit, &d, &[Location::xy(0.1, 0.1)], Some(&[vec![0.2]]), 0).unwrap();
        assert!(ok.se[0] > 0.0);
    }
}

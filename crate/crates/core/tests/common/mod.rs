#![allow(dead_code)]

use nskrig::kernel::{CovariateLink, KernelField, KernelMatrix, ScalarField};
use nskrig::nonstationary::{NonstationarySpec, NsCorrelation};
use nskrig::Location;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
    (0..n).map(|_| Location::xy(rng.random(), rng.random())).collect()
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelMatrix {
    let l1 = 10f64.powf(rng.random_range(-2.5..-0.5));
    let l2 = l1 * 10f64.powf(rng.random_range(-1.5..0.0));
    KernelMatrix::from_spectral(l1, l2, rng.random_range(0.0..std::f64::consts::PI)).unwrap()
}

pub fn random_correlation(rng: &mut ChaCha8Rng) -> NsCorrelation {
    match rng.random_range(0..3) {
        0 => NsCorrelation::Exponential,
        1 => NsCorrelation::matern(1.5),
        _ => NsCorrelation::Gaussian,
    }
}

/// A mixture or covariate-driven nonstationary covariance; returns the spec
/// and per-location covariates when the spec needs them.
pub fn random_ns(rng: &mut ChaCha8Rng, locs: &[Location], mixture: bool) -> (NonstationarySpec, Option<Vec<Vec<f64>>>) {
    let correlation = random_correlation(rng);
    if mixture {
        let m = rng.random_range(1..=6);
        let basis = uniform(rng, m);
        let kernels = (0..m).map(|_| random_kernel(rng)).collect();
        let sigmas = (0..m).map(|_| rng.random_range(0.3..3.0)).collect();
        let bw = rng.random_range(0.1..0.6);
        let spec = NonstationarySpec {
            sigma: ScalarField::mixture(basis.clone(), sigmas, Some(bw)).unwrap(),
            kernel: KernelField::mixture(basis, kernels, Some(bw)).unwrap(),
            correlation,
        };
        (spec, None)
    } else {
        let k = 2;
        let link = |rng: &mut ChaCha8Rng, base: f64, spread: f64| CovariateLink {
            intercept: base,
            coefficients: (0..k).map(|_| rng.random_range(-spread..spread)).collect(),
        };
        let spec = NonstationarySpec {
            sigma: ScalarField::Covariate {
                log_value: link(rng, 0.0, 0.5),
            },
            kernel: KernelField::Covariate {
                log_eigenvalue1: link(rng, -3.0, 1.0),
                log_eigenvalue2: link(rng, -4.0, 1.0),
                angle: link(rng, 0.5, 2.0),
            },
            correlation,
        };
        let cov = locs
            .iter()
            .map(|s| vec![s.coords()[0] - 0.5, (3.0 * s.coords()[1]).sin()])
            .collect();
        (spec, Some(cov))
    }
}

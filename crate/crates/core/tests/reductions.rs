//! Constant kernel fields reduce to stationary anisotropic covariances, and
//! Matérn with smoothness 1/2 is exponential.

use nskrig::kernel::{KernelField, KernelMatrix, ScalarField};
use nskrig::nonstationary::{NonstationarySpec, NsCorrelation};
use nskrig::stationary::{aniso_distance, exponential, matern, AnisotropyMatrix, Correlation, IsotropicParams};
use nskrig::{CovarianceSpec, Location};
use proptest::prelude::*;

fn g(c: &NsCorrelation, r: f64) -> f64 {
    match c {
        NsCorrelation::Exponential => (-r).exp(),
        NsCorrelation::Gaussian => (-r * r).exp(),
        NsCorrelation::Matern { .. } => Correlation::Matern { smoothness: 1.5 }.eval(r),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn constant_field_is_stationary(
        l1 in 0.005f64..2.0, ratio in 0.02f64..1.0, angle in 0.0f64..3.14159,
        sigma in 0.1f64..5.0, which in 0usize..3,
        sx in -2.0f64..2.0, sy in -2.0f64..2.0, tx in -2.0f64..2.0, ty in -2.0f64..2.0,
    ) {
        let k = KernelMatrix::from_spectral(l1, l1 * ratio, angle).unwrap();
        let corr = [NsCorrelation::Exponential, NsCorrelation::matern(1.5), NsCorrelation::Gaussian][which].clone();
        let spec = CovarianceSpec::Nonstationary(NonstationarySpec {
            sigma: ScalarField::constant(sigma),
            kernel: KernelField::constant(k),
            correlation: corr.clone(),
        });
        let s = Location::xy(sx, sy);
        let t = Location::xy(tx, ty);
        let h = s.lag(&t);
        let d = aniso_distance(&h[..], &AnisotropyMatrix::new(k).unwrap()).unwrap();
        let want = sigma * sigma * g(&corr, d);
        let got = spec.covariance(&s, &t).unwrap();
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }
}

#[test]
fn matern_half_is_exponential_on_grid() {
    let p = IsotropicParams::new(1.7, 0.4, 0.5).unwrap();
    for i in 0..1000 {
        let h = 5.0 * i as f64 / 999.0;
        let a = matern(h, &p).unwrap();
        let b = exponential(h, 1.7, 0.4).unwrap();
        assert!((a - b).abs() <= 1e-10, "h={h}: {a} vs {b}");
    }
}

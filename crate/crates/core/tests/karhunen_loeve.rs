//! Properties of EOF decompositions and truncated Karhunen–Loève covariances.

use nalgebra::DMatrix;
use nskrig::basis::{eof_decompose, empirical_cov, kl_truncated_cov, truncation_error, EofBasis, KlSpec};
use nskrig::linalg::frobenius;
use nskrig::location::regular_grid;
use nskrig::{build_cov_matrix, CovarianceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_replicates(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Vec<Vec<f64>> {
    // correlated through a random mixing matrix
    let mix = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    (0..r)
        .map(|_| {
            let z = nalgebra::DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
            (&mix * z).iter().copied().collect()
        })
        .collect()
}

#[test]
fn full_rank_reconstructs_empirical_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(2..15);
        let r = rng.random_range(1..40);
        let c = empirical_cov(&random_replicates(&mut rng, n, r)).unwrap().matrix;
        let b = eof_decompose(&c).unwrap();
        let rel = frobenius(&(kl_truncated_cov(&b, n).unwrap() - &c)) / frobenius(&c);
        assert!(rel <= 1e-10, "{rel}");
    }
}

#[test]
fn truncation_error_is_monotone_and_spectral() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.random_range(2..15);
        let c = empirical_cov(&random_replicates(&mut rng, n, 30)).unwrap().matrix;
        let b = eof_decompose(&c).unwrap();
        let errs: Vec<f64> = (1..=n).map(|l| truncation_error(&c, &b, l).unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        // squared error is the tail sum of squared eigenvalues
        for (l, e) in errs.iter().enumerate() {
            let tail: f64 = b.eigenvalues[l + 1..].iter().map(|v| v * v).sum();
            assert!((e * e - tail).abs() <= 1e-9 * frobenius(&c).powi(2));
        }
    }
}

#[test]
fn spectral_truncation_beats_random_projections() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = empirical_cov(&random_replicates(&mut rng, 6, 50)).unwrap().matrix;
    let b = eof_decompose(&c).unwrap();
    for l in 1..6 {
        let best = truncation_error(&c, &b, l).unwrap();
        for _ in 0..20 {
            let g = DMatrix::<f64>::from_fn(6, l, |_, _| StandardNormal.sample(&mut rng));
            let q = g.qr().q();
            let p = &q * q.transpose();
            let approx = &p * &c * &p;
            assert!(best <= frobenius(&(&c - approx)) + 1e-12);
        }
    }
}

#[test]
fn karhunen_loeve_spec_matches_truncation() {
    let locs = regular_grid(0.0, 1.0, 0.0, 1.0, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = empirical_cov(&random_replicates(&mut rng, 9, 40)).unwrap().matrix;
    let basis: EofBasis = eof_decompose(&c).unwrap();
    let spec = CovarianceSpec::KarhunenLoeve(KlSpec {
        locations: locs.clone(),
        basis: basis.clone(),
        rank: 4,
    });
    let m = build_cov_matrix(&spec, &locs, None).unwrap();
    let want = kl_truncated_cov(&basis, 4).unwrap();
    assert!(frobenius(&(m - want)) <= 1e-12 * frobenius(&c));
    assert!(build_cov_matrix(&spec, &[nskrig::Location::xy(5.0, 5.0)], None).is_err());
}

//! Monte Carlo consistency of the simulators with their covariances.

use nskrig::basis::empirical_cov;
use nskrig::convolution::{discrete_convolution_cov, simulate_discrete_convolution, simulate_gp, ConvolutionGrid};
use nskrig::kernel::{KernelField, KernelMatrix};
use nskrig::location::regular_grid;
use nskrig::stationary::{Correlation, StationarySpec};
use nskrig::{build_cov_matrix, CovarianceSpec, Location};

fn within_three_se(emp: f64, truth: f64, var_ii: f64, var_jj: f64, r: usize) -> bool {
    // var of a product of jointly normal mean-zero variables: c_ii c_jj + c_ij^2
    let se = ((var_ii * var_jj + truth * truth) / r as f64).sqrt();
    (emp - truth).abs() <= 3.0 * se
}

#[test]
fn discrete_convolution_matches_its_covariance() {
    let basis = vec![Location::xy(0.2, 0.5), Location::xy(0.8, 0.5)];
    let field = KernelField::mixture(
        basis,
        vec![
            KernelMatrix::from_spectral(0.04, 0.01, 0.5).unwrap(),
            KernelMatrix::from_spectral(0.02, 0.02, 0.0).unwrap(),
        ],
        None,
    )
    .unwrap();
    let grid = ConvolutionGrid::new(regular_grid(-0.3, 1.3, -0.3, 1.3, 12, 12), 0.01).unwrap();
    let locs = [Location::xy(0.3, 0.5), Location::xy(0.5, 0.5), Location::xy(0.7, 0.4)];
    let r = 5000;
    let sim = simulate_discrete_convolution(&field, &grid, &locs, None, r, 17).unwrap();
    let emp = empirical_cov(&sim.replicates).unwrap().matrix;
    for i in 0..3 {
        for j in 0..3 {
            let c = discrete_convolution_cov(&field, &grid, &locs[i], &locs[j]).unwrap();
            let cii = discrete_convolution_cov(&field, &grid, &locs[i], &locs[i]).unwrap();
            let cjj = discrete_convolution_cov(&field, &grid, &locs[j], &locs[j]).unwrap();
            assert!(within_three_se(emp[(i, j)], c, cii, cjj, r), "({i},{j}) {} vs {c}", emp[(i, j)]);
        }
    }
}

#[test]
fn cholesky_simulation_matches_covariance() {
    let spec = CovarianceSpec::Stationary(StationarySpec::isotropic(2.0, 0.4, Correlation::Matern { smoothness: 1.5 }));
    let locs = [Location::xy(0.0, 0.0), Location::xy(0.3, 0.1), Location::xy(1.0, 1.0)];
    let r = 5000;
    let nugget = 0.2;
    let sim = simulate_gp(&spec, &locs, None, nugget, r, 3).unwrap();
    let emp = empirical_cov(&sim.replicates).unwrap().matrix;
    let mut c = build_cov_matrix(&spec, &locs, None).unwrap();
    for i in 0..3 {
        c[(i, i)] += nugget;
    }
    for i in 0..3 {
        for j in 0..3 {
            assert!(within_three_se(emp[(i, j)], c[(i, j)], c[(i, i)], c[(j, j)], r));
        }
    }
}

#[test]
fn simulation_is_deterministic_across_thread_counts() {
    let spec = CovarianceSpec::Stationary(StationarySpec::isotropic(1.0, 0.3, Correlation::Exponential));
    let locs = regular_grid(0.0, 1.0, 0.0, 1.0, 5, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_gp(&spec, &locs, None, 0.1, 8, 99).unwrap())
    };
    assert_eq!(run(1), run(3));
}

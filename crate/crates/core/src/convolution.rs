//! Discrete process convolutions: white noise on a finite grid smoothed by
//! location-dependent Gaussian kernels, the locally-stationary mixture of
//! Fuentes, and exact GP simulation by Cholesky factorization.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_cov_matrix, CovarianceSpec};
use crate::error::{domain, Error, Result};
use crate::kernel::{KernelField, KernelMatrix};
use crate::linalg;
use crate::location::{bounding_box, regular_grid, Location};
use crate::stationary::StationarySpec;

/// Nodes `u_l` carrying iid `N(0, noise_variance)` amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionGrid {
    pub nodes: Vec<Location>,
    pub noise_variance: f64,
}

impl ConvolutionGrid {
    pub fn new(nodes: Vec<Location>, noise_variance: f64) -> Result<Self> {
        let g = Self { nodes, noise_variance };
        g.validate()?;
        Ok(g)
    }

    /// Regular `nx x ny` lattice over the bounding box of `locs`, extended on
    /// each side by `max(10% of the span, 3 * max_kernel_std)`.
    pub fn covering(locs: &[Location], max_kernel_std: f64, nx: usize, ny: usize, noise_variance: f64) -> Result<Self> {
        let (lo, hi) = bounding_box(locs).ok_or(Error::EmptyData)?;
        let pad = |k: usize| (0.1 * (hi[k] - lo[k])).max(3.0 * max_kernel_std);
        let (px, py) = (pad(0), pad(1));
        let nodes = if locs[0].dim() == 1 {
            regular_grid(lo[0] - px, hi[0] + px, 0.0, 0.0, nx, 1)
                .into_iter()
                .map(|l| Location::x(l.coords()[0]))
                .collect()
        } else {
            regular_grid(lo[0] - px, hi[0] + px, lo[1] - py, hi[1] + py, nx, ny)
        };
        Self::new(nodes, noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return domain("convolution grid needs at least one node");
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return domain(format!("white-noise variance must be nonnegative, got {}", self.noise_variance));
        }
        for (i, a) in self.nodes.iter().enumerate() {
            if self.nodes[i + 1..].contains(a) {
                return domain(format!("convolution grid node {i} is duplicated"));
            }
        }
        Ok(())
    }
}

/// Gaussian density with covariance `k` centred at `s`, evaluated at `u`.
pub fn gaussian_kernel(s: &Location, u: &Location, k: &KernelMatrix) -> f64 {
    let ch = k.cholesky();
    gaussian_kernel_factored(s, u, s.dim(), ch.log_det(), |h| ch.quad_inv(h))
}

fn gaussian_kernel_factored(s: &Location, u: &Location, dim: usize, log_det: f64, quad: impl Fn(&[f64; 2]) -> f64) -> f64 {
    let log_norm = -0.5 * dim as f64 * (2.0 * PI).ln() - 0.5 * log_det;
    (log_norm - 0.5 * quad(&s.lag(u))).exp()
}

/// Kernel weights `K_s(s - u_l)` for every grid node, with Σ(s) from the field.
pub fn kernel_weights(field: &KernelField, grid: &ConvolutionGrid, s: &Location, covariates: &[f64]) -> Result<Vec<f64>> {
    let k = field.eval(s, covariates)?;
    Ok(fixed_kernel_weights(&k, &grid.nodes, s))
}

fn fixed_kernel_weights(k: &KernelMatrix, nodes: &[Location], s: &Location) -> Vec<f64> {
    let ch = k.cholesky();
    let ld = ch.log_det();
    nodes
        .iter()
        .map(|u| gaussian_kernel_factored(s, u, s.dim(), ld, |h| ch.quad_inv(h)))
        .collect()
}

/// `σ_u² Σ_l w_s[l] w_t[l]` for precomputed kernel weights.
pub fn weighted_convolution_cov(ws: &[f64], wt: &[f64], noise_variance: f64) -> f64 {
    noise_variance * ws.iter().zip(wt).map(|(a, b)| a * b).sum::<f64>()
}

/// Exact covariance of the discrete process convolution at `s` and `t`.
pub fn discrete_convolution_cov(field: &KernelField, grid: &ConvolutionGrid, s: &Location, t: &Location) -> Result<f64> {
    let ws = kernel_weights(field, grid, s, &[])?;
    let wt = kernel_weights(field, grid, t, &[])?;
    Ok(weighted_convolution_cov(&ws, &wt, grid.noise_variance))
}

/// Kernel field plus convolution grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteConvolutionSpec {
    pub kernel: KernelField,
    pub grid: ConvolutionGrid,
}

/// Locally-stationary mixture: a fixed Gaussian kernel and one stationary
/// covariance per grid node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuentesSpec {
    pub nodes: Vec<Location>,
    pub kernel: KernelMatrix,
    pub local: Vec<StationarySpec>,
    /// Optional Riemann-sum cell volume multiplying every term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_volume: Option<f64>,
}

impl FuentesSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return domain("Fuentes grid needs at least one node");
        }
        if self.nodes.len() != self.local.len() {
            return Err(Error::Shape(format!(
                "{} grid nodes but {} local covariances",
                self.nodes.len(),
                self.local.len()
            )));
        }
        self.kernel.validate()?;
        for l in &self.local {
            l.validate()?;
        }
        if let Some(v) = self.cell_volume {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("cell volume must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn weights(&self, s: &Location) -> Vec<f64> {
        fixed_kernel_weights(&self.kernel, &self.nodes, s)
    }

    pub fn covariance_weighted(&self, s: &Location, t: &Location, ws: &[f64], wt: &[f64]) -> f64 {
        fuentes_cov_weighted(s, t, ws, wt, &self.local) * self.cell_volume.unwrap_or(1.0)
    }
}

/// `Σ_l w_s[l] w_t[l] C_l(s, t)` for precomputed kernel values.
pub fn fuentes_cov_weighted(s: &Location, t: &Location, ws: &[f64], wt: &[f64], local: &[StationarySpec]) -> f64 {
    ws.iter()
        .zip(wt)
        .zip(local)
        .map(|((a, b), c)| a * b * c.covariance(s, t))
        .sum()
}

pub fn fuentes_cov(spec: &FuentesSpec, s: &Location, t: &Location) -> f64 {
    spec.covariance_weighted(s, t, &spec.weights(s), &spec.weights(t))
}

/// Simulated values at fixed locations; `replicates[r][i]` is replicate `r` at location `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub locations: Vec<Location>,
    pub replicates: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Independent stream for replicate `r` derived from `seed`.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `Ŷ(s) = Σ_l K_s(s - u_l) V(u_l)` with `V(u_l)` iid `N(0, σ_u²)`.
pub fn simulate_discrete_convolution(
    field: &KernelField,
    grid: &ConvolutionGrid,
    locs: &[Location],
    covariates: Option<&[Vec<f64>]>,
    replicates: usize,
    seed: u64,
) -> Result<FieldRealization> {
    field.validate()?;
    grid.validate()?;
    let weights = locs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x = covariates.and_then(|c| c.get(i)).map(|v| v.as_slice()).unwrap_or(&[]);
            kernel_weights(field, grid, s, x).map_err(|e| Error::FieldEvaluation {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sd = grid.noise_variance.sqrt();
    let reps = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let v: Vec<f64> = standard_normals(&mut rng, grid.nodes.len())
                .into_iter()
                .map(|z| sd * z)
                .collect();
            weights
                .iter()
                .map(|w| w.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(FieldRealization {
        locations: locs.to_vec(),
        replicates: reps,
        seed,
    })
}

/// Exact Gaussian simulation `L z (+ nugget noise)` from the covariance matrix
/// of `spec` at `locs`.
pub fn simulate_gp(
    spec: &CovarianceSpec,
    locs: &[Location],
    covariates: Option<&[Vec<f64>]>,
    nugget: f64,
    replicates: usize,
    seed: u64,
) -> Result<FieldRealization> {
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return domain(format!("nugget must be nonnegative, got {nugget}"));
    }
    let n = locs.len();
    let c = build_cov_matrix(spec, locs, covariates)?;
    let zero = c.iter().all(|v| *v == 0.0);
    let lower = if zero || n == 0 {
        None
    } else {
        Some(linalg::cholesky_jittered(&c, "simulation covariance")?.chol.l())
    };
    let noise_sd = nugget.sqrt();
    let reps = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let z = DVector::from_vec(standard_normals(&mut rng, n));
            let e = standard_normals(&mut rng, n);
            let y = match &lower {
                Some(l) => l * z,
                None => DVector::zeros(n),
            };
            y.iter().zip(e).map(|(y, e)| y + noise_sd * e).collect()
        })
        .collect();
    Ok(FieldRealization {
        locations: locs.to_vec(),
        replicates: reps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::Correlation;

    #[test]
    fn gaussian_kernel_is_a_density() {
        // crude 2-d Riemann sum
        let k = KernelMatrix::from_spectral(0.3, 0.1, 0.5).unwrap();
        let c = Location::xy(0.0, 0.0);
        let h = 0.01;
        let mut total = 0.0;
        for i in -400..=400 {
            for j in -400..=400 {
                total += gaussian_kernel(&c, &Location::xy(i as f64 * h, j as f64 * h), &k) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn single_node_covariance() {
        let c = 0.37;
        assert!((weighted_convolution_cov(&[c], &[c], 2.0) - c * c * 2.0).abs() < 1e-16);
        let ws = [0.2, 0.5, 0.1];
        assert!(weighted_convolution_cov(&ws, &ws, 1.0) > 0.0);
    }

    #[test]
    fn zero_noise_gives_zero_field() {
        let grid = ConvolutionGrid::new(vec![Location::xy(0.0, 0.0), Location::xy(1.0, 0.0)], 0.0).unwrap();
        let field = KernelField::constant(KernelMatrix::identity(2));
        let r = simulate_discrete_convolution(&field, &grid, &[Location::xy(0.5, 0.5)], None, 3, 1).unwrap();
        assert!(r.replicates.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_same_realization() {
        let grid = ConvolutionGrid::new(crate::location::regular_grid(0.0, 1.0, 0.0, 1.0, 4, 4), 1.0).unwrap();
        let field = KernelField::constant(KernelMatrix::diagonal(0.1, 0.05).unwrap());
        let locs = [Location::xy(0.2, 0.3), Location::xy(0.8, 0.1)];
        let a = simulate_discrete_convolution(&field, &grid, &locs, None, 4, 99).unwrap();
        let b = simulate_discrete_convolution(&field, &grid, &locs, None, 4, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_discrete_convolution(&field, &grid, &locs, None, 4, 100).unwrap();
        assert_ne!(a.replicates, c.replicates);
    }

    #[test]
    fn fuentes_single_term_plug_in() {
        let local = [StationarySpec::isotropic(1.0, 1.0, Correlation::Exponential)];
        let s = Location::xy(0.0, 0.0);
        let t = Location::xy(0.6, 0.8);
        let v = fuentes_cov_weighted(&s, &t, &[1.0], &[1.0], &local);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn fuentes_diagonal_is_weighted_variance() {
        let nodes = crate::location::regular_grid(0.0, 1.0, 0.0, 1.0, 3, 3);
        let local = vec![StationarySpec::isotropic(2.5, 0.3, Correlation::Gaussian); 9];
        let spec = FuentesSpec {
            nodes,
            kernel: KernelMatrix::diagonal(0.2, 0.1).unwrap(),
            local,
            cell_volume: None,
        };
        let s = Location::xy(0.4, 0.45);
        let w = spec.weights(&s);
        let want = 2.5 * w.iter().map(|v| v * v).sum::<f64>();
        assert!((fuentes_cov(&spec, &s, &s) - want).abs() < 1e-14 * want);
    }

    #[test]
    fn covering_grid_pads_bounding_box() {
        let locs = [Location::xy(0.0, 0.0), Location::xy(1.0, 2.0)];
        let g = ConvolutionGrid::covering(&locs, 0.05, 5, 5, 1.0).unwrap();
        let (lo, hi) = bounding_box(&g.nodes).unwrap();
        assert!((lo[0] + 0.15).abs() < 1e-12 && (hi[0] - 1.15).abs() < 1e-12);
        assert!((lo[1] + 0.2).abs() < 1e-12 && (hi[1] - 2.2).abs() < 1e-12);
        let g = ConvolutionGrid::covering(&locs, 1.0, 5, 5, 1.0).unwrap();
        let (lo, _) = bounding_box(&g.nodes).unwrap();
        assert!((lo[0] + 3.0).abs() < 1e-12);
    }
}

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nskrig::convolution::{replicate_rng, simulate_discrete_convolution, simulate_gp, ConvolutionGrid, DiscreteConvolutionSpec};
use nskrig::covariance::ellipse_field;
use nskrig::engine::local::TwoStageOptions;
use nskrig::engine::optim::NelderMead;
use nskrig::engine::{fit_mle, fit_two_stage, krige, FitOptions, ModelFit, ModelTemplate};
use nskrig::io;
use nskrig::location::bounding_box;
use nskrig::nonstationary::{NonstationarySpec, NsCorrelation};
use nskrig::stationary::{AnisotropyMatrix, Correlation, StationarySpec};
use nskrig::{CovarianceSpec, KernelField, KernelMatrix, Location, ScalarField};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Family, GridSpec, Mode, ModelConfig, RunConfig};
use crate::error::CliError;

/// Stream offset for the location sampler and nugget noise, well away from
/// the replicate streams.
const LOCATION_STREAM: usize = 1 << 40;
const NUGGET_STREAM: usize = 1 << 41;

/// Runs one mode and returns the files written. Nothing is written unless the
/// whole computation succeeds.
pub fn run(mode: Mode, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate(mode)?;
    let header: Vec<String> = cfg.echo(mode).lines().map(String::from).collect();
    let files = match mode {
        Mode::Simulate => simulate(cfg, &header)?,
        Mode::Fit => fit(cfg, &header)?,
        Mode::Predict => predict(cfg, &header)?,
        Mode::Ellipses => ellipses(cfg, &header)?,
    };
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        io::write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

fn grid(cfg: &RunConfig) -> Result<GridSpec, CliError> {
    cfg.grid.ok_or_else(|| CliError::Config("a grid is required".into()))
}

fn kernel(m: &ModelConfig, extra_angle: f64) -> Result<KernelMatrix, CliError> {
    let [e1, e2] = m.eigenvalues;
    Ok(KernelMatrix::from_spectral(e1, e2, m.angle.to_radians() + extra_angle)?)
}

/// Near-square `a x b` arrangement of `m` cells over the bounding box, with the
/// longer side along the wider axis; returns the cell centres and the cell diagonal.
pub fn basis_grid(lo: [f64; 2], hi: [f64; 2], m: usize) -> (Vec<Location>, f64) {
    let mut b = (m as f64).sqrt().floor() as usize;
    while b > 1 && m % b != 0 {
        b -= 1;
    }
    let b = b.max(1);
    let a = m / b;
    let (nx, ny) = if hi[0] - lo[0] >= hi[1] - lo[1] { (a, b) } else { (b, a) };
    let (w, h) = ((hi[0] - lo[0]) / nx as f64, (hi[1] - lo[1]) / ny as f64);
    let mut centres = Vec::with_capacity(m);
    for j in 0..ny {
        for i in 0..nx {
            centres.push(Location::xy(lo[0] + (i as f64 + 0.5) * w, lo[1] + (j as f64 + 0.5) * h));
        }
    }
    (centres, w.hypot(h))
}

/// Covariance model used for simulation.
pub fn simulation_spec(cfg: &RunConfig, locs: &[Location]) -> Result<CovarianceSpec, CliError> {
    let m = &cfg.model;
    if let Some(p) = &m.spec {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
        let spec: CovarianceSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        spec.validate()?;
        return Ok(spec);
    }
    let spec = match m.family {
        Family::Exponential => CovarianceSpec::Stationary(StationarySpec::isotropic(m.variance, m.range, Correlation::Exponential)),
        Family::Gaussian => CovarianceSpec::Stationary(StationarySpec::isotropic(m.variance, m.range, Correlation::Gaussian)),
        Family::Matern => CovarianceSpec::Stationary(StationarySpec::isotropic(
            m.variance,
            m.range,
            Correlation::Matern { smoothness: m.smoothness },
        )),
        Family::Anisotropic => CovarianceSpec::Stationary(StationarySpec {
            variance: m.variance,
            range: 1.0,
            correlation: Correlation::Gaussian,
            anisotropy: Some(AnisotropyMatrix::new(kernel(m, 0.0)?)?),
        }),
        Family::Nonstationary => {
            // kernels rotate by a quarter turn from the left edge to the right
            let (lo, hi) = bounding_box(locs).ok_or(nskrig::Error::EmptyData)?;
            let (basis, _) = basis_grid(lo, hi, m.basis);
            let span = (hi[0] - lo[0]).max(f64::MIN_POSITIVE);
            let kernels = basis
                .iter()
                .map(|b| kernel(m, FRAC_PI_2 * (b.coords()[0] - lo[0]) / span))
                .collect::<Result<Vec<_>, _>>()?;
            CovarianceSpec::Nonstationary(NonstationarySpec {
                sigma: ScalarField::constant(m.variance.sqrt()),
                kernel: KernelField::mixture(basis, kernels, m.bandwidth)?,
                correlation: NsCorrelation::Gaussian,
            })
        }
        Family::Convolution => {
            let k = kernel(m, 0.0)?;
            let l = m.convolution_grid;
            CovarianceSpec::DiscreteConvolution(DiscreteConvolutionSpec {
                kernel: KernelField::constant(k),
                grid: ConvolutionGrid::covering(locs, k.max_std(), l, l, m.variance)?,
            })
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn simulation_locations(cfg: &RunConfig, seed: u64) -> Result<Vec<Location>, CliError> {
    let g = grid(cfg)?;
    Ok(match cfg.simulate.locations {
        None => g.locations(),
        Some(0) => return Err(CliError::Config("simulate.locations must be positive".into())),
        Some(n) => {
            let mut rng = replicate_rng(seed, LOCATION_STREAM);
            (0..n)
                .map(|_| Location::xy(rng.random_range(g.xmin..g.xmax), rng.random_range(g.ymin..g.ymax)))
                .collect()
        }
    })
}

fn simulate(cfg: &RunConfig, header: &[String]) -> Result<Vec<(&'static str, String)>, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Config("simulate requires a seed".into()))?;
    let locs = simulation_locations(cfg, seed)?;
    let spec = simulation_spec(cfg, &locs)?;
    if spec.needs_covariates() {
        return Err(CliError::Config("simulation does not support covariate-driven fields".into()));
    }
    let nugget = cfg.model.nugget;
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return Err(CliError::Config(format!("nugget must be nonnegative, got {nugget}")));
    }
    let reps = cfg.simulate.replicates;
    let realization = match &spec {
        CovarianceSpec::DiscreteConvolution(d) => {
            let mut r = simulate_discrete_convolution(&d.kernel, &d.grid, &locs, None, reps, seed)?;
            if nugget > 0.0 {
                let sd = nugget.sqrt();
                for (k, rep) in r.replicates.iter_mut().enumerate() {
                    let mut rng = replicate_rng(seed, NUGGET_STREAM + k);
                    for v in rep.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += sd * z;
                    }
                }
            }
            r
        }
        _ => simulate_gp(&spec, &locs, None, nugget, reps, seed)?,
    };
    log::info!("simulated {} replicate(s) at {} locations", reps, locs.len());
    Ok(vec![("realization.csv", io::realization_csv(&realization, header))])
}

pub fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        nelder_mead: NelderMead {
            max_evals: cfg.optimizer.max_evaluations,
            ..Default::default()
        },
        restarts: cfg.optimizer.restarts,
        seed: cfg.seed.unwrap_or(0),
        require_convergence: cfg.optimizer.require_convergence,
        ..Default::default()
    }
}

fn stationary_template(
    data: &nskrig::engine::SpatialDataset,
    m: &ModelConfig,
) -> Result<ModelTemplate, CliError> {
    let mut t = match m.family {
        Family::Exponential => ModelTemplate::stationary(data, Correlation::Exponential),
        Family::Gaussian => ModelTemplate::stationary(data, Correlation::Gaussian),
        Family::Matern => ModelTemplate::stationary(data, Correlation::Matern { smoothness: m.smoothness }),
        Family::Anisotropic => ModelTemplate::anisotropic(data, Correlation::Gaussian),
        _ => unreachable!("not a stationary family"),
    };
    t.trend = m.trend;
    t.fixed = m.fixed.clone();
    // fixed parameters take the configured values rather than data-driven starts
    if t.is_fixed("nugget") {
        t.nugget = m.nugget;
    }
    let fix_variance = t.is_fixed("variance");
    let fix_range = t.is_fixed("range");
    if let CovarianceSpec::Stationary(s) = &mut t.spec {
        if fix_variance {
            s.variance = m.variance;
        }
        if fix_range && s.anisotropy.is_none() {
            s.range = m.range;
        }
    }
    Ok(t)
}

fn fit(cfg: &RunConfig, header: &[String]) -> Result<Vec<(&'static str, String)>, CliError> {
    let input = cfg.input.as_ref().expect("validated");
    let data = io::ingest_csv(input)?;
    let m = &cfg.model;
    let options = fit_options(cfg);
    let result = match m.family {
        Family::Exponential | Family::Gaussian | Family::Matern | Family::Anisotropic => {
            fit_mle(&data, &stationary_template(&data, m)?, &options)?
        }
        Family::Nonstationary => {
            if !m.fixed.is_empty() {
                log::warn!("fixed parameters are ignored by the two-stage nonstationary fit");
            }
            let (lo, hi) = bounding_box(&data.locations).ok_or(nskrig::Error::EmptyData)?;
            if data.dim() != 2 {
                return Err(CliError::Config("nonstationary fits need two-dimensional locations".into()));
            }
            let (basis, diagonal) = basis_grid(lo, hi, m.basis);
            let radius = m.radius.unwrap_or(0.6 * diagonal);
            log::info!("two-stage fit with {} basis locations, radius {radius}", basis.len());
            let opts = TwoStageOptions {
                fit: options,
                bandwidth: m.bandwidth,
                correlation: NsCorrelation::Gaussian,
                trend: m.trend,
            };
            fit_two_stage(&data, &basis, radius, &opts)?
        }
        Family::Convolution => {
            return Err(CliError::Config(
                "the convolution family is simulation-only; fit with 'nonstationary'".into(),
            ))
        }
    };
    log::info!(
        "log-likelihood {:.6} after {} evaluations (converged: {})",
        result.log_likelihood,
        result.convergence.evaluations,
        result.convergence.converged
    );
    Ok(vec![
        ("fit.json", io::fit_to_json(&result)?),
        ("fit_report.txt", fit_report(&result, header)),
    ])
}

pub fn fit_report(fit: &ModelFit, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    let c = &fit.convergence;
    let _ = writeln!(out, "log_likelihood   {}", fit.log_likelihood);
    let _ = writeln!(out, "initial          {}", c.initial_log_likelihood);
    let _ = writeln!(out, "method           {}", c.method);
    let _ = writeln!(out, "converged        {}", c.converged);
    let _ = writeln!(out, "iterations       {}", c.iterations);
    let _ = writeln!(out, "evaluations      {}", c.evaluations);
    let _ = writeln!(out, "starts           {}", c.starts);
    let _ = writeln!(out, "seed             {}", fit.seed);
    let _ = writeln!(out);
    let width = fit.parameters.iter().map(|p| p.name.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(out, "{:width$}  {:>24}  status", "parameter", "estimate");
    for p in &fit.parameters {
        let status = if p.free { "free" } else { "fixed" };
        let _ = writeln!(out, "{:width$}  {:>24}  {status}", p.name, p.value);
    }
    for (k, b) in fit.trend.coefficients.iter().enumerate() {
        let _ = writeln!(out, "{:width$}  {:>24}  free", format!("trend[{k}]"), b);
    }
    out
}

fn predict(cfg: &RunConfig, header: &[String]) -> Result<Vec<(&'static str, String)>, CliError> {
    let data = io::ingest_csv(cfg.input.as_ref().expect("validated"))?;
    let fit = load(&cfg.fit_path())?;
    let query = grid(cfg)?.locations();
    let p = krige(&fit, &data, &query)?;
    let mut h = header.to_vec();
    h.push("grid order: row-major, x fastest".into());
    Ok(vec![("prediction.csv", io::prediction_csv(&p, &h))])
}

fn ellipses(cfg: &RunConfig, header: &[String]) -> Result<Vec<(&'static str, String)>, CliError> {
    let fit = load(&cfg.fit_path())?;
    let locs = grid(cfg)?.locations();
    let e = ellipse_field(&fit.spec, &locs, None)?;
    let mut h = header.to_vec();
    h.push("grid order: row-major, x fastest; angle in radians".into());
    Ok(vec![("ellipses.csv", io::ellipse_csv(&e, &h))])
}

fn load(path: &Path) -> Result<ModelFit, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("fitted model {} not found", path.display())));
    }
    Ok(io::load_fit(path)?)
}

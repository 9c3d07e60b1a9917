//! Maximum-likelihood fitting over the free parameters of a covariance template.
//!
//! Every numeric parameter of a [`CovarianceSpec`] has a stable name, e.g.
//! `variance`, `range`, `smoothness`, `nugget`, `sigma`, `kernel.eigenvalue1`,
//! `kernel[2].angle`, `anisotropy.eigenvalue2`, `sigma.coef[0]`. Positive
//! quantities are optimized on the log scale; angles and covariate-link
//! coefficients are left as they are.

use serde::{Deserialize, Serialize};

use super::dataset::SpatialDataset;
use super::likelihood::profile_log_likelihood;
use super::optim::{minimize_with_restarts, NelderMead};
use super::trend::{Trend, TrendKind};
use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::kernel::{CovariateLink, KernelField, KernelMatrix, ScalarField};
use crate::location::Location;
use crate::nonstationary::{NonstationarySpec, NsCorrelation};
use crate::stationary::{AnisotropyMatrix, Correlation, StationarySpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Log,
    Identity,
}

impl Transform {
    pub fn forward(&self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Identity => v,
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        match self {
            Transform::Log => u.exp(),
            Transform::Identity => u,
        }
    }
}

type Visitor<'a> = dyn FnMut(&str, &mut f64, Transform) + 'a;

fn visit_kernel(name: &str, k: &mut KernelMatrix, f: &mut Visitor) -> Result<()> {
    if k.dim() == 1 {
        let (a, _, _) = k.entries();
        let mut v = a;
        f(&format!("{name}.eigenvalue1"), &mut v, Transform::Log);
        if v != a {
            *k = KernelMatrix::scalar(v)?;
        }
        return Ok(());
    }
    let sp = k.to_spectral();
    let (mut l1, mut l2, mut th) = (sp.eigenvalue1, sp.eigenvalue2, sp.angle);
    f(&format!("{name}.eigenvalue1"), &mut l1, Transform::Log);
    f(&format!("{name}.eigenvalue2"), &mut l2, Transform::Log);
    f(&format!("{name}.angle"), &mut th, Transform::Identity);
    // untouched kernels keep their exact entries
    if (l1, l2, th) != (sp.eigenvalue1, sp.eigenvalue2, sp.angle) {
        *k = KernelMatrix::from_spectral(l1, l2, th)?;
    }
    Ok(())
}

fn visit_link(name: &str, l: &mut CovariateLink, f: &mut Visitor) {
    f(&format!("{name}.intercept"), &mut l.intercept, Transform::Identity);
    for (i, c) in l.coefficients.iter_mut().enumerate() {
        f(&format!("{name}.coef[{i}]"), c, Transform::Identity);
    }
}

fn visit_scalar_field(name: &str, s: &mut ScalarField, f: &mut Visitor) {
    match s {
        ScalarField::Constant { value } => f(name, value, Transform::Log),
        ScalarField::Mixture { values, .. } => {
            for (m, v) in values.iter_mut().enumerate() {
                f(&format!("{name}[{m}]"), v, Transform::Log);
            }
        }
        ScalarField::Covariate { log_value } => visit_link(name, log_value, f),
    }
}

fn visit_kernel_field(k: &mut KernelField, f: &mut Visitor) -> Result<()> {
    match k {
        KernelField::Constant { matrix } => visit_kernel("kernel", matrix, f),
        KernelField::Mixture { kernels, .. } => {
            for (m, k) in kernels.iter_mut().enumerate() {
                visit_kernel(&format!("kernel[{m}]"), k, f)?;
            }
            Ok(())
        }
        KernelField::Covariate {
            log_eigenvalue1,
            log_eigenvalue2,
            angle,
        } => {
            visit_link("kernel.log_eigenvalue1", log_eigenvalue1, f);
            visit_link("kernel.log_eigenvalue2", log_eigenvalue2, f);
            visit_link("kernel.angle", angle, f);
            Ok(())
        }
    }
}

fn visit_correlation(prefix: &str, c: &mut Correlation, f: &mut Visitor) {
    if let Correlation::Matern { smoothness } = c {
        f(&format!("{prefix}smoothness"), smoothness, Transform::Log);
    }
}

fn visit_stationary(prefix: &str, s: &mut StationarySpec, f: &mut Visitor) -> Result<()> {
    f(&format!("{prefix}variance"), &mut s.variance, Transform::Log);
    match &mut s.anisotropy {
        // the range is confounded with the scale of A
        Some(a) => {
            let mut m = *a.matrix();
            visit_kernel(&format!("{prefix}anisotropy"), &mut m, f)?;
            *a = AnisotropyMatrix::new(m)?;
        }
        None => f(&format!("{prefix}range"), &mut s.range, Transform::Log),
    }
    visit_correlation(prefix, &mut s.correlation, f);
    Ok(())
}

/// Calls `f(name, value, transform)` on every numeric parameter of `spec`, in a
/// fixed order, writing back whatever `f` leaves in `value`.
pub fn visit_parameters(spec: &mut CovarianceSpec, f: &mut Visitor) -> Result<()> {
    match spec {
        CovarianceSpec::Stationary(s) => visit_stationary("", s, f),
        CovarianceSpec::Higdon { kernel } => visit_kernel_field(kernel, f),
        CovarianceSpec::PaciorekSchervish { kernel, correlation } => {
            visit_kernel_field(kernel, f)?;
            visit_correlation("", correlation, f);
            Ok(())
        }
        CovarianceSpec::Nonstationary(ns) => {
            visit_scalar_field("sigma", &mut ns.sigma, f);
            visit_kernel_field(&mut ns.kernel, f)?;
            if let NsCorrelation::Matern { smoothness } = &mut ns.correlation {
                visit_scalar_field("smoothness", smoothness, f);
            }
            Ok(())
        }
        CovarianceSpec::Fuentes(fs) => {
            for (l, s) in fs.local.iter_mut().enumerate() {
                visit_stationary(&format!("local[{l}]."), s, f)?;
            }
            Ok(())
        }
        CovarianceSpec::DiscreteConvolution(d) => {
            f("noise_variance", &mut d.grid.noise_variance, Transform::Log);
            visit_kernel_field(&mut d.kernel, f)
        }
        CovarianceSpec::KarhunenLoeve(_) => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub transform: Transform,
    pub free: bool,
}

/// A covariance family with initial parameter values, a nugget, a trend and
/// the set of parameters held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub spec: CovarianceSpec,
    pub nugget: f64,
    #[serde(default)]
    pub trend: TrendKind,
    /// Parameter names held at their template value. A trailing `*` matches
    /// every name with that prefix.
    #[serde(default)]
    pub fixed: Vec<String>,
}

fn initial_scales(data: &SpatialDataset) -> (f64, f64) {
    let var = data.sample_variance();
    let var = if var > 0.0 { var } else { 1.0 };
    let diam = data.diameter();
    let range = if diam > 0.0 { 0.1 * diam } else { 1.0 };
    (var, range)
}

impl ModelTemplate {
    pub fn new(spec: CovarianceSpec, nugget: f64, trend: TrendKind) -> Self {
        Self {
            spec,
            nugget,
            trend,
            fixed: vec![],
        }
    }

    pub fn fix(mut self, name: impl Into<String>) -> Self {
        self.fixed.push(name.into());
        self
    }

    pub fn is_fixed(&self, name: &str) -> bool {
        self.fixed.iter().any(|p| match p.strip_suffix('*') {
            Some(prefix) => name.starts_with(prefix),
            None => p == name,
        })
    }

    /// Isotropic stationary model. Range starts at 10% of the domain diameter,
    /// variance at the sample variance, and nugget at 5% of it.
    pub fn stationary(data: &SpatialDataset, correlation: Correlation) -> Self {
        let (var, range) = initial_scales(data);
        Self::new(
            CovarianceSpec::Stationary(StationarySpec::isotropic(var, range, correlation)),
            0.05 * var,
            TrendKind::Constant,
        )
    }

    /// Geometrically anisotropic stationary model `σ² g(sqrt(h'A^{-1}h))` with
    /// `A` starting at `(10% of diameter)² I`.
    pub fn anisotropic(data: &SpatialDataset, correlation: Correlation) -> Self {
        let (var, range) = initial_scales(data);
        let a = if data.dim() == 1 {
            KernelMatrix::scalar(range * range)
        } else {
            KernelMatrix::diagonal(range * range, range * range)
        }
        .expect("positive initial kernel");
        Self::new(
            CovarianceSpec::Stationary(StationarySpec {
                variance: var,
                range: 1.0,
                correlation,
                anisotropy: Some(AnisotropyMatrix::new(a).expect("valid")),
            }),
            0.05 * var,
            TrendKind::Constant,
        )
    }

    /// Nonstationary model with constant σ and a mixture kernel field whose
    /// basis kernels start at `(10% of diameter)² I`.
    pub fn nonstationary_mixture(
        data: &SpatialDataset,
        basis: Vec<Location>,
        bandwidth: Option<f64>,
        correlation: NsCorrelation,
    ) -> Result<Self> {
        let (var, range) = initial_scales(data);
        let k = if data.dim() == 1 {
            KernelMatrix::scalar(range * range)?
        } else {
            KernelMatrix::diagonal(range * range, range * range)?
        };
        let kernels = vec![k; basis.len()];
        Ok(Self::new(
            CovarianceSpec::Nonstationary(NonstationarySpec {
                sigma: ScalarField::constant(var.sqrt()),
                kernel: KernelField::mixture(basis, kernels, bandwidth)?,
                correlation,
            }),
            0.05 * var,
            TrendKind::Constant,
        ))
    }

    pub fn parameters(&self) -> Result<Vec<Parameter>> {
        let mut out = Vec::new();
        let mut spec = self.spec.clone();
        let mut nugget = self.nugget;
        let mut push = |name: &str, v: &mut f64, transform: Transform| {
            out.push(Parameter {
                name: name.to_string(),
                value: *v,
                transform,
                free: !self.is_fixed(name),
            })
        };
        visit_parameters(&mut spec, &mut push)?;
        push("nugget", &mut nugget, Transform::Log);
        Ok(out)
    }

    /// Spec and nugget with the free parameters set from unconstrained `x`.
    pub fn apply(&self, x: &[f64]) -> Result<(CovarianceSpec, f64)> {
        let mut spec = self.spec.clone();
        let mut nugget = self.nugget;
        let mut i = 0;
        let mut set = |name: &str, v: &mut f64, t: Transform| {
            if !self.is_fixed(name) {
                *v = t.inverse(x[i]);
                i += 1;
            }
        };
        visit_parameters(&mut spec, &mut set)?;
        set("nugget", &mut nugget, Transform::Log);
        Ok((spec, nugget))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub nelder_mead: NelderMead,
    pub restarts: usize,
    /// Standard deviation of restart perturbations on the unconstrained scale.
    pub restart_jitter: f64,
    pub seed: u64,
    /// Fail with a convergence error instead of returning an unconverged fit.
    pub require_convergence: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMead::default(),
            restarts: 3,
            restart_jitter: 0.5,
            seed: 0,
            require_convergence: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub starts: usize,
    pub initial_log_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub value: f64,
    pub free: bool,
}

/// A fitted model: everything needed to reproduce its predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub spec: CovarianceSpec,
    pub nugget: f64,
    pub trend: Trend,
    pub log_likelihood: f64,
    pub convergence: ConvergenceReport,
    pub seed: u64,
    pub parameters: Vec<ParameterEstimate>,
}

impl ModelFit {
    /// A model with given parameters; only the trend is estimated (by GLS).
    pub fn fixed(data: &SpatialDataset, spec: CovarianceSpec, nugget: f64, trend: TrendKind) -> Result<Self> {
        data.validate()?;
        let p = profile_log_likelihood(data, &spec, nugget, trend)?;
        let template = ModelTemplate::new(spec.clone(), nugget, trend);
        let parameters = template
            .parameters()?
            .into_iter()
            .map(|p| ParameterEstimate {
                name: p.name,
                value: p.value,
                free: false,
            })
            .collect();
        Ok(Self {
            spec,
            nugget,
            trend: p.trend,
            log_likelihood: p.log_likelihood,
            convergence: ConvergenceReport {
                method: "none".into(),
                converged: true,
                iterations: 0,
                evaluations: 1,
                starts: 0,
                initial_log_likelihood: p.log_likelihood,
            },
            seed: 0,
            parameters,
        })
    }
}

/// Maximizes the profile log-likelihood (trend by GLS) over the free
/// parameters of `template` with multi-start Nelder–Mead.
pub fn fit_mle(data: &SpatialDataset, template: &ModelTemplate, options: &FitOptions) -> Result<ModelFit> {
    data.validate()?;
    template.spec.validate()?;
    let params = template.parameters()?;
    let mut x0 = Vec::new();
    for p in params.iter().filter(|p| p.free) {
        let u = p.transform.forward(p.value);
        if !u.is_finite() {
            return Err(Error::Initialization(format!(
                "free parameter {} has initial value {} outside its domain",
                p.name, p.value
            )));
        }
        x0.push(u);
    }

    let evaluate = |x: &[f64]| -> Result<f64> {
        let (spec, nugget) = template.apply(x)?;
        Ok(profile_log_likelihood(data, &spec, nugget, template.trend)?.log_likelihood)
    };
    let initial = match evaluate(&x0) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => return Err(Error::Initialization(format!("log-likelihood at the initial point is {v}"))),
        Err(e) => {
            return Err(Error::Initialization(format!(
                "log-likelihood at the initial point failed: {e}"
            )))
        }
    };
    let objective = |x: &[f64]| match evaluate(x) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };
    let run = minimize_with_restarts(
        &objective,
        &x0,
        &options.nelder_mead,
        options.restarts,
        options.restart_jitter,
        options.seed,
    );
    if options.require_convergence && !run.best.converged {
        return Err(Error::Convergence(format!(
            "simplex did not converge within {} evaluations",
            options.nelder_mead.max_evals
        )));
    }

    let (spec, nugget) = template.apply(&run.best.x)?;
    let profiled = profile_log_likelihood(data, &spec, nugget, template.trend)?;
    let fitted = ModelTemplate {
        spec: spec.clone(),
        nugget,
        ..template.clone()
    };
    let parameters = fitted
        .parameters()?
        .into_iter()
        .map(|p| ParameterEstimate {
            name: p.name,
            value: p.value,
            free: p.free,
        })
        .collect();
    Ok(ModelFit {
        spec,
        nugget,
        trend: profiled.trend,
        log_likelihood: profiled.log_likelihood,
        convergence: ConvergenceReport {
            method: "nelder-mead".into(),
            converged: run.best.converged,
            iterations: run.iterations,
            evaluations: run.evaluations,
            starts: run.starts,
            initial_log_likelihood: initial,
        },
        seed: options.seed,
        parameters,
    })
}

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Fit,
    Predict,
    Ellipses,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Fit => "fit",
            Mode::Predict => "predict",
            Mode::Ellipses => "ellipses",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Gaussian,
    Matern,
    /// Stationary with a geometric anisotropy matrix.
    Anisotropic,
    /// Mixture kernel field, fitted in two stages.
    Nonstationary,
    /// Discrete process convolution (simulation only).
    Convolution,
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "exponential" => Family::Exponential,
            "gaussian" => Family::Gaussian,
            "matern" => Family::Matern,
            "anisotropic" => Family::Anisotropic,
            "nonstationary" => Family::Nonstationary,
            "convolution" => Family::Convolution,
            other => return Err(CliError::Config(format!("unknown model family '{other}'"))),
        })
    }
}

/// Regular prediction or simulation grid, row-major with x fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite());
        if !finite || self.xmax <= self.xmin || self.ymax <= self.ymin {
            return Err(CliError::Config(format!(
                "grid bounds must be finite with min < max, got {self:?}"
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(CliError::Config(format!(
                "grid resolution must be at least 2 per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub fn locations(&self) -> Vec<nskrig::Location> {
        nskrig::location::regular_grid(self.xmin, self.xmax, self.ymin, self.ymax, self.nx, self.ny)
    }
}

impl FromStr for GridSpec {
    type Err = CliError;

    /// `"xmin,xmax,ymin,ymax,nx,ny"`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(',').map(|p| p.trim()).collect();
        let bad = || CliError::Config(format!("grid must be \"xmin,xmax,ymin,ymax,nx,ny\", got \"{s}\""));
        if parts.len() != 6 {
            return Err(bad());
        }
        let f = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
        let u = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        let g = GridSpec {
            xmin: f(0)?,
            xmax: f(1)?,
            ymin: f(2)?,
            ymax: f(3)?,
            nx: u(4)?,
            ny: u(5)?,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Model description: the true model for `simulate`, the template for `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub variance: f64,
    pub range: f64,
    pub smoothness: f64,
    pub nugget: f64,
    /// Kernel eigenvalues for anisotropic, nonstationary and convolution models.
    pub eigenvalues: [f64; 2],
    /// Kernel major-axis angle in degrees.
    pub angle: f64,
    /// Basis-grid size M for nonstationary fits.
    pub basis: usize,
    pub radius: Option<f64>,
    pub bandwidth: Option<f64>,
    /// Convolution grid nodes per axis.
    pub convolution_grid: usize,
    pub trend: nskrig::engine::TrendKind,
    /// Parameters held fixed while fitting.
    pub fixed: Vec<String>,
    /// JSON covariance specification overriding the fields above (simulate only).
    pub spec: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: Family::Exponential,
            variance: 1.0,
            range: 0.3,
            smoothness: 1.5,
            nugget: 0.0,
            eigenvalues: [0.09, 0.01],
            angle: 0.0,
            basis: 8,
            radius: None,
            bandwidth: None,
            convolution_grid: 20,
            trend: nskrig::engine::TrendKind::Constant,
            fixed: vec![],
            spec: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Number of uniformly scattered locations within the grid bounds; the
    /// grid nodes themselves are used when absent.
    pub locations: Option<usize>,
    pub replicates: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            locations: None,
            replicates: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_evaluations: usize,
    pub require_convergence: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_evaluations: 2000,
            require_convergence: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Observations CSV for fit and predict.
    pub input: Option<PathBuf>,
    /// Fitted model for predict and ellipses; `<out>/fit.json` when absent.
    pub fit: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub model: ModelConfig,
    pub simulate: SimulateConfig,
    pub optimizer: OptimizerConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn fit_path(&self) -> PathBuf {
        self.fit.clone().unwrap_or_else(|| self.out_dir().join("fit.json"))
    }

    /// The effective configuration as TOML, for echoing into outputs.
    pub fn echo(&self, mode: Mode) -> String {
        let body = toml::to_string(self).unwrap_or_else(|e| format!("unserializable config: {e}"));
        format!("mode = \"{}\"\n{body}", mode.name())
    }

    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{} requires {what}", mode.name())))
            }
        };
        match mode {
            Mode::Simulate => {
                need(self.seed.is_some(), "a seed")?;
                need(self.grid.is_some(), "a grid")?;
                need(self.simulate.replicates >= 1, "at least one replicate")?;
            }
            Mode::Fit => need(self.input.is_some(), "an input file")?,
            Mode::Predict => {
                need(self.input.is_some(), "an input file")?;
                need(self.grid.is_some(), "a grid")?;
            }
            Mode::Ellipses => need(self.grid.is_some(), "a grid")?,
        }
        if self.model.basis == 0 {
            return Err(CliError::Config("basis size must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        let g: GridSpec = "0,1,-1,2,3,4".parse().unwrap();
        assert_eq!((g.nx, g.ny, g.ymin), (3, 4, -1.0));
        assert!("0,1,0,1,1,5".parse::<GridSpec>().is_err());
        assert!("0,1,0,1,5".parse::<GridSpec>().is_err());
        assert!("1,0,0,1,5,5".parse::<GridSpec>().is_err());
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let text = r#"
            seed = 7
            out = "o"
            [grid]
            xmin = 0.0
            xmax = 1.0
            ymin = 0.0
            ymax = 1.0
            nx = 4
            ny = 4
            [model]
            family = "matern"
            smoothness = 2.5
            fixed = ["smoothness"]
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.model.family, Family::Matern);
        assert_eq!(c.model.variance, 1.0);
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }

    #[test]
    fn mode_requirements() {
        let c = RunConfig::default();
        assert!(c.validate(Mode::Simulate).is_err());
        assert!(c.validate(Mode::Fit).is_err());
        let c = RunConfig {
            input: Some("d.csv".into()),
            ..Default::default()
        };
        assert!(c.validate(Mode::Fit).is_ok());
    }
}

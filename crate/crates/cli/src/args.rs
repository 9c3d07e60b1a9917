use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::config::{Family, GridSpec, Mode, RunConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Simulate,
    Fit,
    Predict,
    Ellipses,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Fit => Mode::Fit,
            ModeArg::Predict => Mode::Predict,
            ModeArg::Ellipses => Mode::Ellipses,
        }
    }
}

/// Nonstationary spatial covariance modelling: simulate, fit, predict, ellipses.
///
/// Flags override the corresponding entries of the config file.
#[derive(Debug, Parser)]
#[command(name = "nskrig", version)]
pub struct Args {
    #[arg(value_enum)]
    pub mode: ModeArg,

    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// exponential, gaussian, matern, anisotropic, nonstationary or convolution.
    #[arg(long)]
    pub model: Option<String>,

    /// "xmin,xmax,ymin,ymax,nx,ny".
    #[arg(long)]
    pub grid: Option<String>,

    /// Number of basis locations for nonstationary models.
    #[arg(long)]
    pub basis: Option<usize>,

    /// Neighbourhood radius for the local fits.
    #[arg(long)]
    pub radius: Option<f64>,

    /// Mixture-weight bandwidth.
    #[arg(long)]
    pub bandwidth: Option<f64>,

    /// Observations CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Fitted model JSON.
    #[arg(long)]
    pub fit: Option<PathBuf>,

    /// Number of simulated replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
}

impl Args {
    /// Loads the config file, if any, and applies flag overrides.
    pub fn resolve(&self) -> Result<(Mode, RunConfig), CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = Some(s);
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        if let Some(m) = &self.model {
            c.model.family = m.parse::<Family>()?;
        }
        if let Some(g) = &self.grid {
            c.grid = Some(g.parse::<GridSpec>()?);
        }
        if let Some(b) = self.basis {
            c.model.basis = b;
        }
        if let Some(r) = self.radius {
            c.model.radius = Some(r);
        }
        if let Some(b) = self.bandwidth {
            c.model.bandwidth = Some(b);
        }
        if let Some(i) = &self.input {
            c.input = Some(i.clone());
        }
        if let Some(f) = &self.fit {
            c.fit = Some(f.clone());
        }
        if let Some(r) = self.replicates {
            c.simulate.replicates = r;
        }
        let mode = Mode::from(self.mode);
        c.validate(mode)?;
        Ok((mode, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_config() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed = 1\n[model]\nfamily = \"gaussian\"\nbasis = 4").unwrap();
        let path = f.path().to_str().unwrap().to_string();
        let a = Args::parse_from(["nskrig", "fit", "--config", &path, "--seed", "9", "--input", "d.csv", "--basis", "6"]);
        let (mode, c) = a.resolve().unwrap();
        assert_eq!(mode, Mode::Fit);
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.model.basis, 6);
        assert_eq!(c.model.family, Family::Gaussian);
    }

    #[test]
    fn bad_model_name_is_config_error() {
        let a = Args::parse_from(["nskrig", "fit", "--input", "d.csv", "--model", "spline"]);
        assert!(matches!(a.resolve(), Err(CliError::Config(_))));
    }
}

//! Likelihood, kriging and maximum-likelihood fitting.

pub mod dataset;
pub mod fit;
pub mod krige;
pub mod likelihood;
pub mod local;
pub mod optim;
pub mod trend;

pub use dataset::SpatialDataset;
pub use fit::{fit_mle, FitOptions, ModelFit, ModelTemplate};
pub use krige::{krige, PredictionResult};
pub use likelihood::log_likelihood;
pub use local::{estimate_local_kernels, fit_two_stage, TwoStageOptions};
pub use trend::{Trend, TrendKind};

//! Nonstationary spatial Gaussian processes.
//!
//! Covariance models range from the stationary Matérn family through
//! kernel-convolution constructions with spatially-varying kernel matrices
//! ([`nonstationary`], [`convolution`]) to truncated empirical-orthogonal-function
//! expansions ([`basis`]). The [`engine`] module fits these models by maximum
//! likelihood, including a two-stage local/global procedure for mixture kernel
//! fields, and produces kriging predictions with standard errors.

pub mod basis;
pub mod convolution;
pub mod covariance;
pub mod engine;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod location;
pub mod nonstationary;
pub mod special;
pub mod stationary;

pub use covariance::{build_cov_matrix, CovarianceSpec};
pub use error::{Error, ErrorClass, Result};
pub use kernel::{KernelField, KernelMatrix, ScalarField};
pub use location::Location;

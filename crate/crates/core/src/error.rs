use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("parameter domain: {0}")]
    Domain(String),

    /// Matrix or vector dimensions, or symmetry, are inconsistent.
    #[error("shape: {0}")]
    Shape(String),

    /// A covariance matrix could not be factorized even after jitter.
    #[error("conditioning: {context} (smallest eigenvalue {min_eigenvalue:e})")]
    Conditioning { context: String, min_eigenvalue: f64 },

    #[error("input: {0}")]
    Input(String),

    #[error("no data")]
    EmptyData,

    #[error("missing covariates at location {index}")]
    MissingCovariate { index: usize },

    #[error("field evaluation failed at location {index}: {source}")]
    FieldEvaluation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data at basis {index}: {count} observations within radius, need {required}")]
    InsufficientData {
        index: usize,
        count: usize,
        required: usize,
    },

    #[error("initialization: {0}")]
    Initialization(String),

    #[error("convergence: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes used for process exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Conditioning,
    Convergence,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Conditioning { .. } => ErrorClass::Conditioning,
            Error::Initialization(_) | Error::Convergence(_) => ErrorClass::Convergence,
            Error::FieldEvaluation { source, .. } => source.class(),
            _ => ErrorClass::Input,
        }
    }

    /// Short stable identifier, e.g. `E_CONDITIONING`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "E_DOMAIN",
            Error::Shape(_) => "E_SHAPE",
            Error::Conditioning { .. } => "E_CONDITIONING",
            Error::Input(_) => "E_INPUT",
            Error::EmptyData => "E_EMPTY",
            Error::MissingCovariate { .. } => "E_COVARIATE",
            Error::FieldEvaluation { source, .. } => source.code(),
            Error::InsufficientData { .. } => "E_INSUFFICIENT",
            Error::Initialization(_) => "E_INIT",
            Error::Convergence(_) => "E_CONVERGENCE",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::Json(_) => "E_JSON",
        }
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

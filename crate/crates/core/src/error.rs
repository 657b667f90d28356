use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("counts sum to {sum}, expected {trials} trials")]
    CountSum { sum: u64, trials: u64 },

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("relative frequency {0} is an endpoint; the width formula needs 0 < nu < 1")]
    Endpoint(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("under-determined fit: {required} experiments required, {provided} provided (deficit {})", required - provided)]
    Underdetermined { required: usize, provided: usize },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// A stable snake_case tag for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidProbabilities(_) => "invalid_probabilities",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CountSum { .. } => "count_sum",
            Error::Domain { .. } => "domain",
            Error::Endpoint(_) => "endpoint",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Capacity(_) => "capacity",
            Error::Underdetermined { .. } => "underdetermined",
            Error::NotConverged(_) => "not_converged",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

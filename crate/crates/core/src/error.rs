use thiserror::Error;

/// Errors produced by the modelling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    Factorization { pivot: usize, value: f64 },

    #[error("column {column} has {found} positive entries, need at least 2")]
    InsufficientPositives { column: usize, found: usize },

    #[error("log-likelihood contribution of row {row} is not finite")]
    LikelihoodUnderflow { row: usize },

    #[error("bootstrap unstable: {failed} of {total} replica fits failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("rejection sampler starved for subset {subset:?} (acceptance {acceptance:e})")]
    SamplerStarved { subset: Vec<usize>, acceptance: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::Io(_) => match err.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            },
            _ => Error::Parse(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverse iteration did not converge after {iterations} iterations (last Rayleigh quotient {rayleigh})")]
    NonConvergence { iterations: usize, rayleigh: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("singular tridiagonal system at row {0}")]
    Singular(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

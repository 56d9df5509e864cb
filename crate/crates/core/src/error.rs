use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("measure is not integrable on |y| > {cutoff}: {reason}")]
    NonIntegrable { cutoff: f64, reason: String },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    Quadrature { tol: f64, err: f64 },

    #[error("map returned a non-finite value at y = {at}")]
    NonFiniteMap { at: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("Fortet-Mourier program failed: {0}")]
    LinearProgram(String),

    #[error("oracle grid too coarse to certify: {0}")]
    OracleResolution(String),

    #[error("non-finite state at step {step} (path {path})")]
    NonFiniteState { path: u64, step: usize },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("spectral radius is zero; matrix cannot be rescaled")]
    ZeroSpectralRadius,

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("RLS covariance collapse: denominator {denominator:e} at step {step}")]
    CovarianceCollapse { denominator: f64, step: u64 },

    #[error("normal matrix is singular (pivot {pivot:e} at row {row})")]
    Singular { pivot: f64, row: usize },

    #[error("action {0} outside the admissible range [-1, 1]")]
    ActionOutOfBounds(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss in {which}: {value}")]
    NonFiniteLoss { which: &'static str, value: f64 },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("config error at `{path}`: {message}")]
    ConfigKey { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

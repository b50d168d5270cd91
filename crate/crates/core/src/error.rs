use thiserror::Error;

/// Errors raised by the simulation, model and fitting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state holds {photons} photons, above the truncation bound of {n_max}")]
    TruncationOverflow { photons: u32, n_max: u32 },

    #[error("mode index {index} is invalid for a {mode_count}-mode state")]
    InvalidMode { index: usize, mode_count: usize },

    #[error("occupation has {got} modes, state has {expected}")]
    ModeCountMismatch { expected: usize, got: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    Unnormalized { norm_sqr: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge (achieved error estimate {error_estimate:e})")]
    QuadratureNotConverged { error_estimate: f64 },

    #[error("zero denominator while forming {0}")]
    ZeroDenominator(&'static str),

    #[error("fit did not converge after {iterations} iterations")]
    FitNotConverged { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the neck model, grid, spectral and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{method} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "contraction hypothesis failed at step {step}: measured ratio {ratio:.4} \
         (first correction {first_correction:.3e}, multiplier range [{multiplier_min:.4}, {multiplier_max:.4}])"
    )]
    ContractionFailure {
        step: usize,
        ratio: f64,
        first_correction: f64,
        multiplier_min: f64,
        multiplier_max: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

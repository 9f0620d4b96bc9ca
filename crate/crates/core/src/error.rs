use thiserror::Error;

/// Errors raised by every module of the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} lies outside the tabulated domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(
        "solver failed: {message} (last residual {residual:.3e} after {iterations} iterations)"
    )]
    SolverFailure {
        message: String,
        residual: f64,
        iterations: usize,
    },

    #[error("domain too small: boundary amplitude {ratio:.3e} of peak exceeds {limit:.1e}")]
    DomainTooSmall { ratio: f64, limit: f64 },

    #[error("Fock dimension {dimension} exceeds the cap {cap}")]
    Capacity { dimension: usize, cap: usize },

    #[error("grid too coarse: mode {mode} energy error {relative_error:.3e} exceeds 1%")]
    Resolution { mode: usize, relative_error: f64 },

    #[error("interaction range {range:.3e} is below two grid spacings ({spacing:.3e})")]
    UnderResolvedInteraction { range: f64, spacing: f64 },

    #[error("condensate wave function keeps only {weight:.4} of its norm in the mode basis")]
    BasisInsufficient { weight: f64 },

    #[error("invalid weight: minimum {min:.3e} on the region is not positive")]
    InvalidWeight { min: f64 },

    #[error("out of the dilute regime: a^2 N = {value:.4} must be below 1")]
    OutOfRegime { value: f64 },

    #[error("report integrity: {0}")]
    Integrity(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("run directory is locked: {0}")]
    Locked(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::OutOfRegime { .. } => 2,
            Error::SolverFailure { .. }
            | Error::DomainTooSmall { .. }
            | Error::Capacity { .. }
            | Error::Resolution { .. }
            | Error::UnderResolvedInteraction { .. }
            | Error::BasisInsufficient { .. }
            | Error::InvalidWeight { .. }
            | Error::OutOfDomain { .. } => 3,
            Error::Integrity(_) | Error::Verification(_) => 4,
            Error::Locked(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}

use thiserror::Error;

/// Errors raised by the library.
///
/// Configuration problems carry the dotted path of the offending field so the
/// command-line front end can point at it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("no stationary mean: spectral radius of diag(alpha)^-1 d is {spectral_radius}")]
    NotStationary { spectral_radius: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("ODE integrator step size underflow at T = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("truncation horizon {given} is too small, need at least {required}")]
    HorizonTooShort { given: f64, required: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no admissible root: {0}")]
    NoAdmissibleRoot(String),

    #[error("fixed point iterate lost positivity at iteration {iteration}: min value {min_value}")]
    LostPositivity { iteration: usize, min_value: f64 },

    #[error("input data: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for configuration and validation failures, as opposed to runtime numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Shape(_) | Error::Json(_) | Error::NotStationary { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

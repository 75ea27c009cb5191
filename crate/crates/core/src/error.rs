use thiserror::Error;

/// Errors raised across the simulation, verification and backtest layers.
#[derive(Debug, Error)]
pub enum SptError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("grid misalignment: {0}")]
    GridMismatch(String),

    #[error("weights sum to {sum} (expected 1)")]
    NotNormalized { sum: f64 },

    #[error("market weights within {tol:e} of the simplex boundary (min {min:e}, max {max})")]
    SimplexBoundary { min: f64, max: f64, tol: f64 },

    #[error("characteristic {index} = {value} lies outside {domain}")]
    OutsideDomain {
        index: usize,
        value: f64,
        domain: String,
    },

    #[error("generating function value {value} is not positive")]
    NonPositiveValue { value: f64 },

    #[error("portfolio value non-positive ({value}) at step {step}")]
    ValueDepleted { step: usize, value: f64 },

    #[error("numeraire invariance violated: direct {direct}, via reference {via}")]
    NumeraireMismatch { direct: f64, via: f64 },

    #[error("quality overlay insolvent: Z^eta = {value}")]
    OverlayInsolvent { value: f64 },

    #[error("declared monotonicity of coordinate {index} violated at step {step}")]
    MonotonicityViolated { index: usize, step: usize },

    #[error("singular design matrix: numerical rank {rank} < {cols} columns")]
    SingularDesign { rank: usize, cols: usize },

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("malformed binary path: {0}")]
    Format(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SptError>;

impl SptError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        SptError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: &str, expected: usize, actual: usize) -> Self {
        SptError::DimensionMismatch {
            context: context.to_string(),
            expected,
            actual,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SptError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

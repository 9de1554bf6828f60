use thiserror::Error;

/// Library-wide error type. Variants are grouped so a caller can map them to
/// "bad input" versus "a mathematical prerequisite fails on valid input".
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constraint `{label}`: matrix is not symmetric positive semidefinite ({detail})")]
    NotPsd { label: String, detail: String },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("empty sampling grid for index `{label}`")]
    EmptyGrid { label: String },

    #[error("point is not feasible for the nominal system (residual {residual:.3e})")]
    InfeasiblePoint { residual: f64 },

    #[error("strong Slater condition does not hold: {0}")]
    SscViolated(String),

    #[error("feasible set is empty for the given parameter")]
    EmptyFeasibleSet,

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error reports a failed mathematical prerequisite on
    /// otherwise well-formed input (the CLI maps these to exit code 3).
    pub fn is_prerequisite_failure(&self) -> bool {
        matches!(
            self,
            Error::InfeasiblePoint { .. } | Error::SscViolated(_) | Error::EmptyFeasibleSet
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

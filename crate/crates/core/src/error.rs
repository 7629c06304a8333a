use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// The segment-restricted system matrix cannot be inverted reliably.
    #[error("singular system (rank deficiency {rank_deficiency}, condition {condition:.3e})")]
    SingularSystem {
        rank_deficiency: usize,
        condition: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("reference point is not optimal: x_hat improves on it by {improvement:.3e}")]
    ReferenceNotOptimal { improvement: f64 },

    #[error("reference point violates hard constraints by {violation:.3e}")]
    ReferenceInfeasible { violation: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dimension(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }
}

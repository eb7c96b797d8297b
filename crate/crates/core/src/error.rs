use thiserror::Error;

/// Errors produced anywhere in the fitting and simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Validation { row: Option<usize>, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error{}: {message}", index.map(|i| format!(" at observation {i}")).unwrap_or_default())]
    Numeric { index: Option<usize>, message: String },

    #[error("monotone likelihood: coefficient {coefficient} diverged (|beta| > {limit}); last iterate {last:?}")]
    Separation {
        coefficient: usize,
        limit: f64,
        last: Vec<f64>,
    },

    #[error("no convergence after {iterations} iterations: {message}")]
    NonConvergence {
        iterations: usize,
        message: String,
        /// Last few objective values (or the last iterate for the Cox fit).
        trace: Vec<f64>,
    },

    #[error("fold stratification failed: {0}")]
    Stratification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(row: Option<usize>, message: impl Into<String>) -> Self {
        Error::Validation {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn numeric(index: Option<usize>, message: impl Into<String>) -> Self {
        Error::Numeric {
            index,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } | Error::Separation { .. } => 3,
            Error::NonConvergence { .. } => 4,
            _ => 2,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Schema(_) => "schema",
            Error::Validation { .. } => "validation",
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::Separation { .. } => "separation",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Stratification(_) => "stratification",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("order {n} outside supported range {min}..={max}")]
    Size { n: usize, min: usize, max: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible computation: {0}")]
    Cost(String),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("test undefined: {0}")]
    UndefinedTest(String),

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("{location}: {message}")]
    Dataset { location: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input (files, labels, arguments) rather
    /// than by a failed or infeasible computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Argument(_)
            | Error::Dimension { .. }
            | Error::Dataset { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Size { .. } => true,
            Error::Context { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

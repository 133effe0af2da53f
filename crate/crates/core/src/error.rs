use thiserror::Error;

/// Errors raised anywhere in the identification and control pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("repeated pole near {0} is not supported (simple poles only)")]
    RepeatedPole(String),

    #[error("rank-deficient least-squares system (condition {condition:.3e}, smallest singular values {smallest:?})")]
    RankDeficient { condition: f64, smallest: Vec<f64> },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 validation, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Dimension(_) | Error::InvalidInput(_) | Error::Parse(_) => 1,
            Error::IllConditioned(_)
            | Error::RepeatedPole(_)
            | Error::RankDeficient { .. }
            | Error::NonConvergence { .. } => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

use thiserror::Error;

/// Errors raised across the library. The variant is the machine-readable
/// category surfaced by the command line front-end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("inconsistent report: {0}")]
    InconsistentReport(String),

    #[error("tracking lost: {0}")]
    TrackingLost(String),

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("{analyzer} analyzer failed: {source}")]
    Analyzer {
        analyzer: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("planner failed at t={time:.2}s: {source}")]
    Planner {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short stable name of the error class.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::OutOfRange(_) => "out-of-range",
            Error::Infeasible(_) => "infeasible",
            Error::InconsistentReport(_) => "inconsistent-report",
            Error::TrackingLost(_) => "tracking-lost",
            Error::UndefinedEstimate(_) => "undefined-estimate",
            Error::Analyzer { source, .. } => source.category(),
            Error::Planner { .. } => "planner",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

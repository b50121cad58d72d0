use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] trajcritic::Error),

    #[error("config: {0}")]
    Config(String),

    /// An audit ran to completion and found violations.
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Config(_) => "config",
            CliError::Verification(_) => "verification",
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),

    #[error("config field `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Engine {
        context: String,
        source: levy_indifference::Error,
    },

    #[error("{0} selftest check(s) failed")]
    SelftestFailed(usize),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine { source, .. } if source.is_numerical() => 2,
            CliError::SelftestFailed(_) => 2,
            _ => 1,
        }
    }
}

impl From<levy_indifference::Error> for CliError {
    fn from(source: levy_indifference::Error) -> Self {
        CliError::Engine {
            context: "engine".into(),
            source,
        }
    }
}

/// Attaches a description of the failing step to engine errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, levy_indifference::Error> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Engine { context: what(), source })
    }
}

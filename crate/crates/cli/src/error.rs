use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Some rows of a sweep failed; the rest were written.
    #[error("{0} row(s) failed")]
    Partial(usize),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Partial(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<matdiv_core::Error> for CliError {
    fn from(e: matdiv_core::Error) -> Self {
        use matdiv_core::Error as E;
        match e {
            E::Numeric { .. } | E::Divergence { .. } => CliError::Numeric(e.to_string()),
            E::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes do not conform, or a size computation overflowed.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine did not converge.
    #[error("numeric error: {what} did not converge after {iterations} iterations")]
    Numeric { what: &'static str, iterations: usize },

    /// The requested combination of options is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },

    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn sizing<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Sizing(msg.into()))
}

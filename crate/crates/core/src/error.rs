use thiserror::Error;

/// Errors raised by the model, the optimizer and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A closed-form expression evaluated to a non-finite value (exact
    /// resonance, matched short, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// An argument is outside the domain the operation is defined on.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An iterative routine failed, or an iterate left the feasible set.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed channel file: {0}")]
    ChannelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

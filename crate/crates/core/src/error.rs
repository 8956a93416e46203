use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),

    #[error("incompatible architecture: {0}")]
    IncompatibleArchitecture(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("one-shot ledger violation on channel `{channel}`: client {client} sent {uploads} upload(s) and received {downloads} message(s)")]
    Ledger {
        channel: String,
        client: usize,
        uploads: usize,
        downloads: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

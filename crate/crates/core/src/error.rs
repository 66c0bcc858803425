use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Each variant maps onto a distinct CLI
/// error prefix (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet: {0}")]
    Alphabet(String),

    #[error("invalid interaction: {0}")]
    Interaction(String),

    #[error("{file} line {line}: {msg}")]
    ModelParse { file: String, line: usize, msg: String },

    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("{0}")]
    OutOfRange(String),

    #[error("sequences must have equal length for cross matching (got {0} and {1})")]
    LengthMismatch(usize, usize),

    #[error("power iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("transfer matrix is not primitive: {0}")]
    Reducible(String),

    #[error("brute-force cap exceeded: {needed} patterns requested, cap is {cap}")]
    CapExceeded { needed: u128, cap: u64 },

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("no admissible k for n = {n}: {reason}")]
    NoAdmissibleK { n: usize, reason: String },

    #[error("sequence file: {0}")]
    SequenceFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag used as the CLI error prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Alphabet(_) | Error::UnknownSymbol(_) | Error::AlphabetMismatch(_) => "alphabet",
            Error::Interaction(_) | Error::ModelParse { .. } => "model",
            Error::OutOfRange(_) | Error::LengthMismatch(..) => "input",
            Error::NoConvergence { .. } | Error::Reducible(_) => "solver",
            Error::CapExceeded { .. } => "cap",
            Error::Plan(_) | Error::NoAdmissibleK { .. } => "plan",
            Error::SequenceFormat(_) => "sequence",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

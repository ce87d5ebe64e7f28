use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register of {0} qubits exceeds the {max}-qubit limit", max = crate::state::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square with power-of-two dimension ({rows}x{cols})")]
    BadShape { rows: usize, cols: usize },

    #[error("invalid qubit subset: {0}")]
    InvalidSubset(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("channel is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative χ entry {value:.3e} for {label}")]
    NegativeChi { label: String, value: f64 },

    #[error("twirl over {0} assignments exceeds the exact-mode limit; use sampled mode")]
    TwirlTooLarge(u128),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures of a numerical invariant (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Invariant(_) | Error::NegativeChi { .. })
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

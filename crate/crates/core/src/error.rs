use std::path::PathBuf;

use thiserror::Error;

/// Failure while decoding a feature file, manifest or model spec.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic bytes at offset 0 (expected \"FMAT\")")]
    BadMagic,
    #[error("unsupported FMAT version {found:#04x} at offset 4")]
    UnsupportedVersion { found: u8 },
    #[error("truncated input: needed {expected} bytes at offset {offset}, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("{extra} trailing bytes after payload at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("invalid shape {n}x{d} in header at offset {offset}")]
    BadShape { offset: usize, n: u64, d: u64 },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field {field}: cannot parse {text:?} as a number")]
    BadNumber {
        line: usize,
        field: usize,
        text: String,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("input is not valid UTF-8 (byte {offset})")]
    Utf8 { offset: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value at {position}")]
    NonFinite { position: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate covariance: {reason} (columns {columns:?})")]
    DegenerateCovariance { columns: Vec<usize>, reason: String },

    #[error("degenerate variance: eta' Sigma eta = {0:e} is not positive")]
    DegenerateVariance(f64),

    #[error("inconsistent selection event: {0}")]
    InconsistentEvent(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trial {trial} (seed {seed}): {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure: 2 for input, parse and I/O
    /// problems, 3 for numerical or degenerate-data failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Parse(_)
            | Error::NonFinite { .. } | Error::Io { .. } => 2,
            Error::DegenerateData(_)
            | Error::DegenerateCovariance { .. }
            | Error::DegenerateVariance(_)
            | Error::InconsistentEvent(_)
            | Error::NumericalFailure(_) => 3,
            Error::InFile { source, .. } | Error::Trial { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The variants are grouped so callers (the CLI in particular) can map them
/// onto exit codes: configuration and data problems versus numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape mismatch: {left:?} vs {right:?} ({context})")]
    Shape {
        left: Vec<usize>,
        right: Vec<usize>,
        context: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("record {id}: field `{field}`: {message}")]
    Record {
        id: String,
        field: &'static str,
        message: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Checkpoint(#[from] ContainerError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("step {step}: {source}")]
    Step {
        step: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numbers going bad rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) => true,
            Error::Step { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn at_step(self, step: u64) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

/// Failures reading the binary tensor container (checkpoints, graph files).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("payload size mismatch: header declares {declared} bytes, found {found}")]
    PayloadSize { declared: u64, found: u64 },
    #[error("tensor table inconsistent: {0}")]
    TensorTable(String),
    #[error("malformed header: {0}")]
    Header(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

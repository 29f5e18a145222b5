use std::path::PathBuf;
use thiserror::Error;

/// Error type shared by the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty image")]
    EmptyImage,

    #[error("haar size must be even")]
    OddHaarSize,

    #[error("unsupported filter size {0} (expected 9 + 6k)")]
    BadFilterSize(i64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("k too large for class")]
    KTooLarge,

    #[error("empty class {0}")]
    EmptyClass(usize),

    #[error("empty model")]
    EmptyModel,

    #[error("degenerate binary problem")]
    DegenerateBinaryProblem,

    #[error("LMA damping exhausted")]
    LmaDampingExhausted,

    #[error("SMO did not converge after {iterations} iterations (KKT violation {violation:.3e} > tol {tol:.3e})")]
    SmoNoConvergence {
        iterations: usize,
        violation: f64,
        tol: f64,
    },

    #[error("no overlapping valid pixels")]
    NoValidOverlap,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery itself (as opposed to
    /// bad inputs); the CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::LmaDampingExhausted | Error::SmoNoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

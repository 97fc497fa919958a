use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Divergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("kernel size {kh}x{kw} must be odd in both axes")]
    EvenKernel { kh: usize, kw: usize },

    #[error("dilation must be positive, got ({0}, {1})")]
    NonPositiveDilation(usize, usize),

    #[error("dtype mismatch: expected {expected}, found {found}")]
    DTypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("empty spatial extent {h}x{w}")]
    EmptySpatial { h: usize, w: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown table row `{0}`")]
    UnknownTableRow(String),

    #[error("spectral modes ({m1}, {m2}) exceed grid spectrum ({h}, {wh}) of a {h}x{w} grid")]
    ModesExceedGrid {
        m1: usize,
        m2: usize,
        h: usize,
        w: usize,
        wh: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("missing backward rule for {0}")]
    MissingBackward(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::NonFiniteGradient(_) | Error::Divergence { .. } => {
                ErrorKind::Divergence
            }
            Error::Io { .. } | Error::Format { .. } | Error::Data(_) | Error::DTypeMismatch { .. } => {
                ErrorKind::Data
            }
            _ => ErrorKind::Config,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

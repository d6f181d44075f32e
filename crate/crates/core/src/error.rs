use std::fmt;
use std::io;
use std::path::PathBuf;

/// Errors raised across the toolkit.
///
/// The variants split into two families: input problems the caller can fix
/// (`Validation`, `Io`, `Format`) and numerical failures that arise while
/// computing (`Numeric`, `Stiff`, `Optimizer`, `Diverged`). The CLI maps the
/// first family to exit code 1 and the second to exit code 2.
#[derive(Debug)]
pub enum Error {
    Validation(String),
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    InvalidState(String),
    Numeric {
        message: String,
        residual: f64,
    },
    Stiff {
        t: f64,
        step: f64,
    },
    Optimizer {
        parameter: String,
    },
    /// Non-finite loss or gradient; carries the epochs completed so far.
    Diverged {
        epoch: usize,
        report: Option<Box<crate::train::TrainReport>>,
    },
    Degenerate(&'static str),
    Sequence {
        seed: u64,
        source: Box<Error>,
    },
    Format(String),
    Io {
        path: PathBuf,
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::ShapeMismatch { .. } | Error::Degenerate(_) | Error::Format(_) => true,
            Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            Error::Sequence { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "shape mismatch in {op}: {lhs:?} vs {rhs:?}")
            }
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::Numeric { message, residual } => {
                write!(f, "numeric error: {message} (residual {residual:e})")
            }
            Error::Stiff { t, step } => {
                write!(f, "step size underflow at t = {t:e} s (h = {step:e} s)")
            }
            Error::Optimizer { parameter } => {
                write!(f, "non-finite gradient for parameter `{parameter}`")
            }
            Error::Diverged { epoch, .. } => write!(f, "training diverged at epoch {epoch}"),
            Error::Degenerate(what) => write!(f, "degenerate range: {what}"),
            Error::Sequence { seed, source } => {
                write!(f, "sequence with seed {seed} failed: {source}")
            }
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Sequence { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a type invariant (non-finite parameter, bad bound, ...).
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Inputs that should have matched in length did not.
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("no data: {0}")]
    NoData(&'static str),

    #[error("cannot build {folds} folds from {magnitudes} magnitudes")]
    TooFewMagnitudes { folds: usize, magnitudes: usize },

    /// Correlation is undefined when either series is constant.
    #[error("zero variance in {0}; correlation is undefined")]
    ZeroVariance(&'static str),

    /// Every refinement produced a non-finite loss.
    #[error("all {} refinements diverged", candidates.len())]
    Diverged { candidates: Vec<[f64; 4]> },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: row {row}: field `{field}`: {reason}")]
    Row {
        path: PathBuf,
        row: usize,
        field: String,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Diverged { .. } | Error::ZeroVariance(_) => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

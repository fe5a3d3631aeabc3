use std::path::PathBuf;

use crate::bridge::CaseKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// `p` was exactly 0 or 1, so the normal quantile is infinite.
    #[error("probability {p} maps to an infinite threshold")]
    InfiniteThreshold { p: f64 },

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error(
        "optimizer did not converge for case {case} (tau = {tau}, deltas = {deltas:?}) after {iterations} iterations"
    )]
    NonConvergence {
        case: CaseKind,
        tau: f64,
        deltas: Vec<f64>,
        iterations: usize,
    },

    #[error("grid point (tau index {tau_index}, delta indices {delta_indices:?}) failed: {source}")]
    GridPoint {
        tau_index: usize,
        delta_indices: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("case {0} uses the closed-form inverse and has no interpolation grid")]
    NoGridForCase(CaseKind),

    #[error("grid file format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("no interpolation grid loaded for case {0}")]
    MissingGrid(CaseKind),

    #[error("degenerate variable '{column}': {reason}")]
    DegenerateVariable { column: String, reason: String },

    #[error("pair ({row}, {col}) failed: {source}")]
    Pair {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Unwraps pair/grid-point context and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pair { source, .. } | Error::GridPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

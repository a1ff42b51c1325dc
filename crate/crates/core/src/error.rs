use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("inconsistent inputs: Born probability {0} lies outside [0, 1]")]
    InconsistentInputs(f64),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("matrix is not a physical state: {0}")]
    NotPhysical(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("perturbed vector has vanishing norm")]
    DegeneratePerturbation,

    #[error("measurement set is not informationally complete (rank {rank} < {required})")]
    NotInformationallyComplete { rank: usize, required: usize },

    #[error("particle filter collapsed: every particle is inconsistent with the data")]
    FilterCollapse,

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input data: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than
    /// by the simulation itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidDimension(_)
        )
    }
}

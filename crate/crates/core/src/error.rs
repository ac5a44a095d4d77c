use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown flight id `{0}`")]
    UnknownFlight(String),

    #[error("flight `{id}` has {len} snapshots, at least {required} are required")]
    FlightTooShort { id: String, len: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-uniform sampling in flight `{flight}` at row {index}: dt {found} vs {expected}")]
    NonUniformSampling {
        flight: String,
        index: usize,
        found: f64,
        expected: f64,
    },

    #[error("empty snapshot system")]
    EmptySystem,

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular value decomposition failed")]
    SvdFailure,

    #[error("eigenvalue solver failed to converge")]
    EigenFailure,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("truncation rank {requested} exceeds available rank {available}")]
    RankTooLarge { requested: usize, available: usize },

    #[error("penalty search did not converge within {iterations} iterations (last lambda {lambda:e})")]
    SearchExhausted { iterations: usize, lambda: f64 },

    #[error("could not bracket a stabilizing penalty after {expansions} expansions")]
    BracketFailure { expansions: usize },

    #[error("rollout diverged at step {step}")]
    Diverged { step: usize },

    #[error("misaligned data: {0}")]
    Misaligned(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

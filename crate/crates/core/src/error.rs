use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("Taylor models defined over different domains")]
    DomainMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported activation `{0}` (only relu and identity are accepted)")]
    UnsupportedActivation(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("Bernstein order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("flowpipe remainder failed to contract after {inflations} inflations (step {step_size} s too large?)")]
    ContractionFailure { inflations: usize, step_size: f64 },

    #[error("robot and obstacle centers coincide")]
    CoincidentObstacle,

    #[error("pose ({x}, {y}) lies outside the world bounds")]
    PoseOutOfBounds { x: f64, y: f64 },

    #[error("training diverged at epoch {epoch}: loss became {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("training label out of actuator caps: v={v}, omega={omega}")]
    LabelOutOfCaps { v: f64, omega: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, detail: impl ToString) -> Self {
        Error::Parse {
            what,
            detail: detail.to_string(),
        }
    }
}

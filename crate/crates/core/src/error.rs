//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("non-monotone timestamps in word {word}, trace {trace}, sample {sample}")]
    NonMonotoneTimestamps {
        word: usize,
        trace: usize,
        sample: usize,
    },

    #[error("non-finite coordinate in word {word}, trace {trace}, sample {sample}")]
    NonFiniteCoordinate {
        word: usize,
        trace: usize,
        sample: usize,
    },

    #[error("empty trace in word {word}, trace {trace}: traces need at least 2 samples")]
    EmptyTrace { word: usize, trace: usize },

    #[error("word {word} has no traces")]
    EmptyWord { word: usize },

    #[error("trace too short: {len} samples, need at least {min}")]
    TraceTooShort { len: usize, min: usize },

    #[error("cutoff {cutoff_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("degenerate word: bounding-box height is zero")]
    DegenerateWord,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("schema version mismatch: expected {expected:?}, found {found:?}")]
    SchemaVersion { expected: String, found: String },

    #[error("feature mode mismatch: model is {model}, request is {requested}")]
    ModeMismatch { model: String, requested: String },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("no evidence: zero scorable segments")]
    NoEvidence,

    #[error("test writer {writer} is not enrolled in the model")]
    UnenrolledWriter { writer: String },

    #[error("inconsistent arc chain: gap of {gap} ink-units at stroke {stroke}")]
    InconsistentArcChain { stroke: usize, gap: f64 },

    #[error("degenerate stroke geometry: {detail}")]
    DegenerateGeometry { detail: String },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

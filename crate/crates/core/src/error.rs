use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series for the Tweedie normalizer did not converge within {terms} terms (y={y}, phi={phi}, zeta={zeta})")]
    SeriesDiverged {
        y: f64,
        phi: f64,
        zeta: f64,
        terms: usize,
    },

    #[error("degenerate weighting: all observation weights are zero")]
    DegenerateWeighting,

    #[error("cannot fit severity: no positive responses in the data")]
    NoPositiveResponses,

    #[error("{which} sub-fit failed: {source}")]
    SubFit {
        which: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("observed log-likelihood dropped by {drop:e} at EM iteration {iteration}")]
    LikelihoodDecrease { iteration: usize, drop: f64 },

    #[error("fit failed for zeta={zeta}: {source}")]
    Profile {
        zeta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{0}")]
    Degenerate(String),

    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("model artifact version {found} is not readable by this build (supports {supported}.x)")]
    VersionMismatch { found: String, supported: u32 },

    #[error("model artifact checksum mismatch")]
    ChecksumMismatch,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

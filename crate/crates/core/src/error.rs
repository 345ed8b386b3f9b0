use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate prompt id {id:?} in {path}")]
    DuplicateId { id: String, path: PathBuf },

    #[error("{path}: row {row}: {message}")]
    InvalidRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("embedding ids do not match the corpus: {0}")]
    IdMismatch(String),

    #[error("non-finite value in row {0}")]
    NonFinite(String),

    #[error("row {0} has zero norm")]
    ZeroNorm(String),

    #[error("matrix is not positive definite (even after ridge {ridge})")]
    NotPositiveDefinite { ridge: f64 },

    #[error("perplexity {perplexity} is infeasible for {n} points (requires 3 * perplexity < n)")]
    InfeasiblePerplexity { perplexity: f64, n: usize },

    #[error("need at least {required} distinct clusters, found {found}")]
    TooFewClusters { required: usize, found: usize },

    #[error("bootstrap resample lost a cluster {retries} times in a row")]
    ResampleExhausted { retries: usize },

    #[error("external service: {0}")]
    Service(String),

    #[error("embedding dimension changed between batches: {first} then {later} (batch {batch})")]
    DimDrift {
        first: usize,
        later: usize,
        batch: usize,
    },

    #[error("missing embedding matrix for model {0:?}")]
    MissingEmbedding(String),

    #[error("no successful trials to select from{0}")]
    NoSuccessfulTrials(String),

    #[error("{0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure came from a remote service rather than local data.
    pub fn is_service(&self) -> bool {
        matches!(self, Error::Service(_) | Error::DimDrift { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

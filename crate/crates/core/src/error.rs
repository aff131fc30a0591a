use thiserror::Error;

/// Errors raised across estimation, simulation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design matrix is rank deficient: pivot {pivot:.3e} at column {column} is below tolerance {tolerance:.3e}")]
    RankDeficient {
        column: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("dataset has no instrument column")]
    MissingInstrument,

    #[error("instrument is irrelevant: |rho_hat| * sd(v) = {relevance:.3e} <= {threshold:.3e}")]
    WeakInstrument { relevance: f64, threshold: f64 },

    #[error("cluster-robust variance needs at least 2 clusters, found {0}")]
    SingleCluster(usize),

    #[error("variance argument `{name}` must be positive, got {value}")]
    NonpositiveVariance { name: &'static str, value: f64 },

    #[error("unsupported scenario: {0}")]
    UnsupportedSpec(String),

    #[error("degenerate scenario: {0}")]
    DegenerateSpec(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("autocovariance at lag 0 must be positive, got {0}")]
    InvalidGamma(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("no replication records to summarize")]
    EmptyRecords,

    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),

    #[error("{excluded} of {total} replications were excluded (limit is 1%)")]
    ExcessiveExclusions { excluded: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

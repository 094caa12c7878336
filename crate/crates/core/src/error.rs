//! Error type shared across the library.

use thiserror::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All the ways library operations can fail.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector shapes do not line up for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument is outside the operation's domain (empty input, zero
    /// clusters, bad ratio, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A factorization was asked for more directions than the data carries.
    #[error("rank deficient: requested {requested} components but rank is {rank}")]
    RankDeficient { rank: usize, requested: usize },

    /// Clustering could not produce the requested number of non-empty groups.
    #[error("clustering failed: {0}")]
    Clustering(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Divergence { epoch: usize, batch: usize },

    /// A federated client's local training diverged; the run is aborted.
    #[error("client {client} diverged during round {round}")]
    ClientDiverged {
        round: usize,
        client: usize,
        #[source]
        source: Box<Error>,
    },

    /// A metric has no defined value on this input (e.g. no positives).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// A record in an input file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// A configuration or saved artifact failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A record does not fit the fitted feature schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// An organization id is out of range for the current partition.
    #[error("unknown organization id {0}")]
    UnknownOrg(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

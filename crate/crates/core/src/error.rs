use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("duplicate column name `{0}` in header")]
    DuplicateColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("dataset has {0} rows; at least 2 are required")]
    TooFewRows(usize),

    #[error("target contains a single class; both classes are required")]
    SingleClass,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("row has {found} columns, model expects {expected}")]
    ColumnCount { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("split leaves the {0} partition empty")]
    EmptyPartition(&'static str),

    #[error("stratified split leaves the {0} partition without one of the classes")]
    PartitionMissingClass(&'static str),

    #[error("no candidate feature has a positive AUPRC")]
    NoInformativeFeature,

    #[error("tree {tree}: {attempts} bootstrap samples in a row contained a single class")]
    SingleClassBootstrap { tree: usize, attempts: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("autoencoder has not been trained")]
    Untrained,

    #[error("autoencoder threshold has not been fitted")]
    NoThreshold,

    #[error("training population is empty")]
    EmptyTrainingPopulation,

    #[error("filtering would remove every {0} row")]
    FilterRemovesClass(&'static str),

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("{failed} of {total} benchmark repetitions failed; aborting (first failure: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

//! Precision-recall-curve (PRC) classification trees and forests for
//! imbalanced binary classification, with an optional autoencoder stage that
//! removes high-reconstruction-error rows from the training set before the
//! forest is grown.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: CSV ingestion, label encoding, min-max scaling, seeded splits
//!   and bootstrap resampling.
//! - [`prc`]: the split criterion (per-feature PR curve, trapezoidal AUPRC,
//!   feature selection by AUPRC and threshold selection by F1).
//! - [`tree`] and [`forest`]: the PRC tree and the bagged PRC random forest.
//! - [`autoencoder`]: a dense symmetric autoencoder used as an anomaly filter.
//! - [`pipeline`]: the autoencoder + forest composition, evaluation metrics and
//!   the repeated-split benchmark harness.

pub mod autoencoder;
pub mod data;
mod error;
pub mod forest;
pub mod pipeline;
pub mod prc;
pub mod seed;
pub mod tree;

pub use error::{Error, Result};

pub use autoencoder::{
    Activation, AeConfig, AutoencoderModel, Optimizer, TrainReport, TrainingPopulation,
};
pub use data::{Dataset, DatasetSummary, Label, MinMaxTable, SplitSpec};
pub use forest::{ForestParams, PrcForest};
pub use pipeline::{Algorithm, BenchmarkConfig, BenchmarkReport, MetricSet, TrainedModel};
pub use prc::{PrCurve, SplitCandidate};
pub use tree::{PrcTree, TreeNode, TreeParams};

/// Version tag written into every serialized model file.
pub const SCHEMA_VERSION: u32 = 1;

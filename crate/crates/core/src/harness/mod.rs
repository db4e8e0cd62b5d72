//! Experiment orchestration: manifests, splits, training with early
//! stopping, checkpoints and reports.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod experiment;
pub mod manifest;
pub mod split;
pub mod trainer;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use config::{ConfigError, CvScheme, ExperimentConfig};
pub use data::{Dataset, Utterance};
pub use experiment::{
    compare_variants, finish_fold, plan_folds, run_experiment, run_experiment_on_manifest, run_experiment_with, score,
    summarize, threads_from_env, with_threads, ComparisonTable, ExperimentReport, FoldOutcome, Summary, THREADS_ENV,
};
pub use manifest::{Manifest, ManifestError, ManifestRow, Split};
pub use split::{dev_holdout, kfold_indices, kfold_split, Fold, SplitError};
pub use trainer::{evaluate, predict, EpochLog, FoldPlan, TrainState, Trainer};

use crate::adapter::ModelError;
use crate::metrics::MetricError;
use crate::repr::LrfError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("utterance {id}: {source}")]
    Lrf {
        id: String,
        #[source]
        source: LrfError,
    },
    #[error("non-finite loss {loss} in fold {fold}, epoch {epoch}, batch {batch}")]
    NonFinite {
        fold: usize,
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("fold {fold}: test ids also used for training: {}", .ids.join(", "))]
    Leakage { fold: usize, ids: Vec<String> },
    #[error("mismatched experiments: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Data(String),
}

//! Experimental protocol: window splits, class balancing, the training loop,
//! metrics, the ablation grid and report rendering.

mod ablation;
mod balance;
mod metrics;
mod report;
mod split;
mod trainer;

use thiserror::Error;

use crate::diffcore::DiffError;
use crate::graph::GraphError;
use crate::models::ModelError;

pub use ablation::{ablation_matrix, AblationCell, AblationReport, ABLATION_SPATIAL, ABLATION_TEMPORAL};
pub use balance::PairBatch;
pub use metrics::{Confusion, MetricsReport};
pub use report::{ablation_csv, ablation_table, loss_csv, metrics_csv, metrics_table, ReportRow};
pub use split::{split, Split, SplitConfig, MIN_WINDOWS};
pub use trainer::{
    evaluate, mean_loss, pair_loss, run_experiment, run_on, train, train_with, EpochStats, ExperimentData, OptimizerKind,
    Outcome, TrainConfig, TrainHistory,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training config: {0}")]
    Config(String),
    #[error("need at least {required} windows, got {got}")]
    TooFewWindows { got: usize, required: usize },
    #[error("cannot balance: no {0} pairs")]
    EmptyClass(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { epoch: usize, batch: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

//! Pool-based active-learning simulation.
//!
//! Labels come from the dataset itself, so each acquisition is an oracle
//! lookup. The acquisition model is a hashed-feature logistic regression
//! retrained from scratch every iteration.

mod acquire;
mod classifier;
mod features;
mod run;

pub use acquire::{acquire_coreset, acquire_least_confidence, acquire_random, macro_f1, AcquisitionStrategy};
pub use classifier::{gradient, loss, softmax, train_classifier, Example, LinearModel, TrainParams};
pub use features::{FeatureHasher, SparseVec, DEFAULT_DIM, MIN_DIM};
pub use run::{
    read_metrics_csv, run_active_learning, write_metrics_csv, IterationMetrics, RunOptions, SimConfig, SimInputs,
    SimOutcome,
};

use thiserror::Error;

use crate::corpus::{CorpusError, DocId};
use crate::prune::PruneError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no labeled example of class {0}")]
    MissingClass(u32),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("feature dimension must be a power of two >= 1024, got {0}")]
    InvalidDim(usize),
    #[error("batch of {batch} exceeds the {available} available documents")]
    BatchTooLarge { batch: usize, available: usize },
    #[error("{predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("the unlabeled pool is exhausted")]
    UnlabeledExhausted,
    #[error("document {0} has no gold label")]
    Unlabeled(DocId),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

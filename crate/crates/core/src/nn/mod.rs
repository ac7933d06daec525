//! Bidirectional recurrent classifier trained with backpropagation through
//! time.
//!
//! All arithmetic is `f64`. Batches are stored time-major: row `t·B + b`
//! holds step `t` of sequence `b`.

mod arch;
mod grid;
mod model;
mod optim;
mod train;

use alloc::string::String;

use thiserror::Error;

pub use arch::{count_params, init_params, Architecture, CellKind, DenseBlock, ModelParams, ParamLayout, RecurrentBlock};
pub use grid::{grid_search, mean_best_val_loss, GridPoint, GridResult, GridRow, GridSpec};
pub use model::{backward, forward, loss_at, predict, weighted_ce_loss, Batch, ForwardCache, Mode, P_CLAMP};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, RMSPROP_EPS, RMSPROP_RHO};
pub use train::{
    evaluate_loss, predict_all, train, train_observed, Decision, EarlyStopping, EpochRecord, Examples, TrainConfig,
    TrainedModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("expected {expected} parameters, got {actual}")]
    ParamCount { expected: usize, actual: usize },
    #[error("parameters contain non-finite values")]
    NonFiniteParams,
    #[error("shape mismatch: expected {expected:?} (steps, channels), got {actual:?}")]
    Shape { expected: (usize, usize), actual: (usize, usize) },
    #[error("empty batch")]
    EmptyBatch,
    #[error("stale/mismatched cache")]
    StaleCache,
    #[error("expected {expected} labels, got {actual}")]
    LabelCount { expected: usize, actual: usize },
    #[error("diverged")]
    Diverged,
    #[error("training and validation sets must be non-empty")]
    EmptySet,
    #[error("training set must contain both classes")]
    SingleClassTraining,
    #[error("empty grid")]
    EmptyGrid,
}

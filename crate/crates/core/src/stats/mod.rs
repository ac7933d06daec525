//! Classification metrics, effect sizes, exact rank correlation and fold
//! aggregation.

mod aggregate;
mod effect;
mod metrics;
mod spearman;

pub use aggregate::{aggregate, Summary};
pub use effect::{classify_effect_size, cohens_d, trajectory_with_ci, EffectSize, EffectSizeResult, TrajectoryPoint, Z_95};
pub use metrics::{auroc, confusion_metrics, ClassMetrics, WeightedMetrics, DEFAULT_THRESHOLD};
pub use spearman::{average_ranks, spearman_exact, SpearmanResult, MAX_EXACT_N};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("AUROC undefined: only one class present")]
    SingleClass,
    #[error("need at least {needed} values per group, got {got}")]
    Undersized { needed: usize, got: usize },
    #[error("zero pooled SD")]
    ZeroPooledSd,
    #[error("exact test supports 2 <= n <= {max}, got n = {n}")]
    OutsideExactRegime { n: usize, max: usize },
    #[error("non-finite value")]
    NonFinite,
}

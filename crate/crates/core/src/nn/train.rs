use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::arch::{init_params, Architecture, ModelParams};
use super::model::{backward, forward, predict, weighted_ce_loss, Batch, Mode};
use super::optim::{Optimizer, OptimizerKind};
use super::NnError;
use crate::dataset::{class_weights, FeatureWindow, Label};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub max_epochs: usize,
    pub patience: usize,
    /// Smallest validation-loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            max_epochs: 50,
            patience: 5,
            min_delta: 1e-6,
            seed: rng::DEFAULT_SEED,
        }
    }
}

/// What to do after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Improved,
    Continue,
    Stop,
}

/// Patience-based early stopping on validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: None,
            since_best: 0,
        }
    }

    /// Records the loss of `epoch` (1-based). A loss improves only if it is
    /// lower than the best so far by at least `min_delta`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Decision {
        match self.best {
            Some((_, best)) if !(loss <= best - self.min_delta) => {
                self.since_best += 1;
                if self.since_best >= self.patience {
                    Decision::Stop
                } else {
                    Decision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.since_best = 0;
                Decision::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub curve: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
    pub class_weights: (f64, f64),
}

/// Windows with their labels.
#[derive(Debug, Clone, Copy)]
pub struct Examples<'a> {
    pub windows: &'a [&'a FeatureWindow],
    pub labels: &'a [Label],
}

impl Examples<'_> {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

// Batch size used when only predictions are needed.
const EVAL_BATCH: usize = 64;

/// Eval-mode probabilities for every window, in order.
pub fn predict_all(params: &ModelParams, windows: &[&FeatureWindow]) -> Result<Vec<f64>, NnError> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(EVAL_BATCH) {
        out.extend(predict(params, &Batch::from_windows(chunk)?)?);
    }
    Ok(out)
}

/// Weighted cross-entropy over a whole set in eval mode.
pub fn evaluate_loss(params: &ModelParams, set: Examples<'_>, weights: (f64, f64)) -> Result<f64, NnError> {
    let probs = predict_all(params, set.windows)?;
    Ok(weighted_ce_loss(&probs, set.labels, weights))
}

pub fn train(arch: &Architecture, config: &TrainConfig, train: Examples<'_>, val: Examples<'_>) -> Result<TrainedModel, NnError> {
    train_observed(arch, config, train, val, &mut |_| {})
}

/// [`train`] with a callback after every epoch.
///
/// Initialization uses `config.seed`; shuffling and dropout use streams
/// derived from it. Class weights come from the training labels and are
/// also used for the validation loss.
pub fn train_observed(
    arch: &Architecture,
    config: &TrainConfig,
    train: Examples<'_>,
    val: Examples<'_>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainedModel, NnError> {
    if train.is_empty() || val.is_empty() {
        return Err(NnError::EmptySet);
    }
    if train.windows.len() != train.labels.len() || val.windows.len() != val.labels.len() {
        return Err(NnError::LabelCount {
            expected: train.windows.len(),
            actual: train.labels.len(),
        });
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(NnError::InvalidConfig("batch size and learning rate must be positive"));
    }
    let weights = class_weights(train.labels).map_err(|_| NnError::SingleClassTraining)?;
    let mut params = init_params(arch, config.seed)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
    let mut shuffle_rng = rng::seeded(rng::derive_seed(config.seed, 1));
    let mut dropout_rng = rng::seeded(rng::derive_seed(config.seed, 2));
    let mut stopper = EarlyStopping::new(config.patience, config.min_delta);
    let mut best_params = params.clone();
    let mut curve = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let windows: Vec<&FeatureWindow> = idx.iter().map(|&i| train.windows[i]).collect();
            let labels: Vec<Label> = idx.iter().map(|&i| train.labels[i]).collect();
            let batch = Batch::from_windows(&windows)?;
            let cache = forward(&params, &batch, Mode::Train, &mut dropout_rng)?;
            let loss = weighted_ce_loss(cache.probs(), &labels, weights);
            if !loss.is_finite() {
                return Err(NnError::Diverged);
            }
            loss_sum += loss * idx.len() as f64;
            let grads = backward(&params, &cache, &labels, weights)?;
            opt.step(&mut params.values, &grads)?;
        }
        let val_loss = evaluate_loss(&params, val, weights)?;
        if !val_loss.is_finite() {
            return Err(NnError::Diverged);
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
        };
        curve.push(record);
        on_epoch(&record);
        match stopper.observe(epoch, val_loss) {
            Decision::Improved => best_params = params.clone(),
            Decision::Continue => {}
            Decision::Stop => break,
        }
    }
    let (best_epoch, best_val_loss) = stopper.best().expect("at least one epoch ran");
    Ok(TrainedModel {
        params: best_params,
        stopped_epoch: curve.len(),
        curve,
        best_epoch,
        best_val_loss,
        class_weights: weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    extern crate std;

    #[test]
    fn patience_trace() {
        let losses = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95];
        let mut es = EarlyStopping::new(5, 1e-6);
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            if es.observe(i + 1, l) == Decision::Stop {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(7));
        assert_eq!(es.best(), Some((2, 0.9)));
    }

    #[test]
    fn monotone_improvement_never_stops() {
        let mut es = EarlyStopping::new(5, 1e-6);
        for e in 1..=50 {
            assert_eq!(es.observe(e, 1.0 / e as f64), Decision::Improved);
        }
    }

    #[test]
    fn tiny_decrease_is_not_improvement() {
        let mut es = EarlyStopping::new(2, 1e-6);
        es.observe(1, 1.0);
        assert_eq!(es.observe(2, 1.0 - 1e-7), Decision::Continue);
        assert_eq!(es.observe(3, f64::NAN), Decision::Stop);
        assert_eq!(es.best(), Some((1, 1.0)));
    }
}

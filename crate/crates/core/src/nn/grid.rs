use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::arch::{count_params, Architecture};
use super::optim::OptimizerKind;
use super::train::{train, Examples, TrainConfig};
use super::NnError;

/// Candidate values for each searched hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    pub recurrent_layers: Vec<usize>,
    pub dense_layers: Vec<usize>,
    pub dropouts: Vec<f64>,
}

impl GridSpec {
    /// The full search space: 4 x 4 x 3 x 4 x 3 x 3 points.
    pub fn standard() -> Self {
        Self {
            learning_rates: vec![1e-4, 3e-4, 1e-3, 1e-2],
            batch_sizes: vec![16, 32, 64, 128],
            optimizers: OptimizerKind::ALL.to_vec(),
            recurrent_layers: vec![1, 2, 3, 4],
            dense_layers: vec![1, 2, 3],
            dropouts: vec![0.3, 0.5, 0.7],
        }
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len()
            * self.batch_sizes.len()
            * self.optimizers.len()
            * self.recurrent_layers.len()
            * self.dense_layers.len()
            * self.dropouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination, the last list varying fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &learning_rate in &self.learning_rates {
            for &batch_size in &self.batch_sizes {
                for &optimizer in &self.optimizers {
                    for &recurrent_layers in &self.recurrent_layers {
                        for &dense_layers in &self.dense_layers {
                            for &dropout in &self.dropouts {
                                out.push(GridPoint {
                                    learning_rate,
                                    batch_size,
                                    optimizer,
                                    recurrent_layers,
                                    dense_layers,
                                    dropout,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub recurrent_layers: usize,
    pub dense_layers: usize,
    pub dropout: f64,
}

impl GridPoint {
    /// Applies the point to a base architecture and config.
    pub fn apply(&self, arch: &Architecture, config: &TrainConfig) -> (Architecture, TrainConfig) {
        let arch = Architecture {
            recurrent_layers: self.recurrent_layers,
            dense_layers: self.dense_layers,
            dropout: self.dropout,
            ..arch.clone()
        };
        let config = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            ..config.clone()
        };
        (arch, config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub point: GridPoint,
    pub n_params: usize,
    /// `None` when the scorer failed for this point.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best: usize,
    pub architecture: Architecture,
    pub config: TrainConfig,
}

/// Scores every grid point and picks the lowest score. Ties go to the
/// smaller model, then to the earlier point. Points whose scorer fails or
/// returns a non-finite value are kept in the table but never selected.
pub fn grid_search<E>(
    spec: &GridSpec,
    base_arch: &Architecture,
    base_config: &TrainConfig,
    mut scorer: impl FnMut(&Architecture, &TrainConfig) -> Result<f64, E>,
) -> Result<GridResult, NnError> {
    let points = spec.points();
    if points.is_empty() {
        return Err(NnError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(points.len());
    for (index, point) in points.into_iter().enumerate() {
        let (arch, config) = point.apply(base_arch, base_config);
        arch.validate()?;
        let score = scorer(&arch, &config).ok().filter(|s| s.is_finite());
        rows.push(GridRow {
            index,
            point,
            n_params: count_params(&arch),
            score,
        });
    }
    let best = rows
        .iter()
        .filter_map(|r| r.score.map(|s| (s, r.n_params, r.index)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .map(|(_, _, i)| i)
        .ok_or(NnError::Diverged)?;
    let (architecture, config) = rows[best].point.apply(base_arch, base_config);
    Ok(GridResult {
        rows,
        best,
        architecture,
        config,
    })
}

/// Mean over folds of the best validation loss reached by [`train`].
pub fn mean_best_val_loss(arch: &Architecture, config: &TrainConfig, folds: &[(Examples<'_>, Examples<'_>)]) -> Result<f64, NnError> {
    if folds.is_empty() {
        return Err(NnError::EmptySet);
    }
    let mut sum = 0.0;
    for &(tr, va) in folds {
        sum += train(arch, config, tr, va)?.best_val_loss;
    }
    Ok(sum / folds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::CellKind;

    extern crate std;

    fn tiny_spec() -> GridSpec {
        GridSpec {
            learning_rates: vec![1e-3],
            batch_sizes: vec![16],
            optimizers: vec![OptimizerKind::Adam],
            recurrent_layers: vec![1, 2],
            dense_layers: vec![1],
            dropouts: vec![0.5],
        }
    }

    #[test]
    fn standard_grid_has_1728_points() {
        let spec = GridSpec::standard();
        assert_eq!(spec.len(), 4 * 4 * 3 * 4 * 3 * 3);
        assert_eq!(spec.points().len(), 1728);
    }

    #[test]
    fn lowest_score_wins() {
        let base = Architecture::reference(9);
        let mut scores = [0.5, 0.4].into_iter();
        let r = grid_search::<()>(&tiny_spec(), &base, &TrainConfig::default(), |_, _| Ok(scores.next().unwrap())).unwrap();
        assert_eq!(r.best, 1);
        assert_eq!(r.architecture.recurrent_layers, 2);
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn tie_goes_to_smaller_model() {
        let base = Architecture::reference(9);
        let mut spec = tiny_spec();
        spec.recurrent_layers = vec![2, 1];
        let r = grid_search::<()>(&spec, &base, &TrainConfig::default(), |_, _| Ok(0.3)).unwrap();
        assert_eq!(r.best, 1);
        assert!(r.rows[1].n_params < r.rows[0].n_params);
    }

    #[test]
    fn tie_with_equal_size_goes_to_grid_order() {
        let base = Architecture::reference(9);
        let mut spec = tiny_spec();
        spec.recurrent_layers = vec![1];
        spec.learning_rates = vec![1e-2, 1e-3];
        let r = grid_search::<()>(&spec, &base, &TrainConfig::default(), |_, _| Ok(0.3)).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.config.learning_rate, 1e-2);
    }

    #[test]
    fn failed_points_are_listed_not_chosen() {
        let base = Architecture {
            cell: CellKind::Gru,
            ..Architecture::reference(5)
        };
        let r = grid_search(&tiny_spec(), &base, &TrainConfig::default(), |a, _| {
            if a.recurrent_layers == 1 {
                Err(())
            } else {
                Ok(0.9)
            }
        })
        .unwrap();
        assert_eq!(r.rows[0].score, None);
        assert_eq!(r.best, 1);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = tiny_spec();
        spec.dropouts.clear();
        let err = grid_search::<()>(&spec, &Architecture::reference(9), &TrainConfig::default(), |_, _| Ok(0.0));
        assert_eq!(err.unwrap_err(), NnError::EmptyGrid);
    }
}

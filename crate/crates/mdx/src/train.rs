//! `train`: leave-one-participant-out training with checkpoints and fold
//! reports.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use rhotic_core::dataset::{lopo_splits, window_sequence, FeatureWindow, Fold, Label};
use rhotic_core::features::FeatureSet;
use rhotic_core::nn::{
    grid_search, predict_all, train, Architecture, EpochRecord, Examples, GridResult, ModelParams, NnError, TrainConfig,
    TrainedModel,
};
use rhotic_core::stats::{auroc, confusion_metrics, StatsError, DEFAULT_THRESHOLD};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{MdxError, Result};
use crate::extract::{check_utterance_id, labels_path, series_path};
use crate::io::tables::{self, LabelRow};
use crate::io::{read_json, sha256_bytes, sha256_file, write_json};
use crate::manifest::{unix_now, write_manifest};
use crate::parallel;

pub const CHECKPOINT_FORMAT: &str = "rhotic-mdx-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

const SERIALIZATION_ORDER: &str = "for each recurrent layer: forward then backward direction, each as W_in \
(gates*h x input, row-major), W_rec (gates*h x h), b (gates*h); gate blocks i,f,g,o for BiLSTM and z,r,n for BiGRU; \
then each dense layer as W (out x in, row-major), b (out)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// Trained weights with everything needed to rebuild the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub format_version: u32,
    pub architecture: Architecture,
    pub seed: u64,
    pub config_sha256: String,
    pub train: TrainConfig,
    pub serialization_order: String,
    pub tensors: Vec<TensorInfo>,
    /// FNV-1a hash of the parameter bit patterns, hex.
    pub fingerprint: String,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, train: &TrainConfig, config_sha256: &str) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            format_version: CHECKPOINT_VERSION,
            architecture: params.arch.clone(),
            seed: train.seed,
            config_sha256: config_sha256.into(),
            train: train.clone(),
            serialization_order: SERIALIZATION_ORDER.into(),
            tensors: params
                .layout()
                .tensors()
                .into_iter()
                .map(|(name, shape, range)| TensorInfo {
                    name,
                    shape,
                    offset: range.start,
                })
                .collect(),
            fingerprint: format!("{:016x}", params.fingerprint()),
            params: params.values.clone(),
        }
    }

    /// Validates the document and rebuilds the parameters.
    pub fn into_params(self) -> std::result::Result<ModelParams, String> {
        if self.format != CHECKPOINT_FORMAT || self.format_version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint format {} v{}", self.format, self.format_version));
        }
        let params = ModelParams::new(self.architecture, self.params).map_err(|e| e.to_string())?;
        if format!("{:016x}", params.fingerprint()) != self.fingerprint {
            return Err("checkpoint fingerprint does not match its parameters".into());
        }
        Ok(params)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_json::<Checkpoint>(path)?
        .into_params()
        .map_err(|e| MdxError::at(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub f1_weighted: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub accuracy: f64,
    /// Absent when the held-out participant has only one class.
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub utterance_id: String,
    pub score: f64,
    pub label: u8,
}

/// Outcome of one held-out participant. Contains no timestamps, so equal
/// runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub feature_set: FeatureSet,
    pub participant_id: String,
    pub fold_index: usize,
    /// Hash of the data, configuration and split that produced this fold.
    pub fold_sha256: String,
    pub metrics: FoldMetrics,
    pub threshold: f64,
    pub notes: Vec<String>,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub class_weights: (f64, f64),
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_loss: f64,
    pub curve: Vec<EpochRecord>,
    pub checkpoint_sha256: String,
    pub predictions: Vec<Prediction>,
}

/// Windows and labels of one feature set, in `labels.csv` order.
pub struct SetData {
    pub set: FeatureSet,
    pub rows: Vec<LabelRow>,
    pub windows: Vec<FeatureWindow>,
    pub files: Vec<PathBuf>,
    pub sha256: String,
}

pub fn load_set(features_dir: &Path, set: FeatureSet) -> Result<SetData> {
    let lp = labels_path(features_dir);
    if !lp.is_file() {
        return Err(MdxError::data(format!("incomplete feature cache: {} not found (run extract first)", lp.display())));
    }
    let rows = tables::read_labels(&lp)?;
    let mut files = vec![lp];
    let mut windows = Vec::with_capacity(rows.len());
    for r in &rows {
        let p = series_path(features_dir, &r.utterance_id, set);
        if !p.is_file() {
            return Err(MdxError::data(format!("incomplete feature cache: {} not found", p.display())));
        }
        let series = tables::read_series(&p, set)?;
        windows.push(window_sequence(&series).map_err(|e| MdxError::at(&p, e))?);
        files.push(p);
    }
    let mut digest = String::new();
    for f in &files {
        digest.push_str(&sha256_file(f)?);
    }
    Ok(SetData {
        set,
        rows,
        windows,
        files,
        sha256: sha256_bytes(digest.as_bytes()),
    })
}

fn examples<'a>(idx: &[usize], refs: &[&'a FeatureWindow], labels: &[Label]) -> (Vec<&'a FeatureWindow>, Vec<Label>) {
    (idx.iter().map(|&i| refs[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
}

fn train_fold(
    data: &SetData,
    fold: &Fold,
    arch: &Architecture,
    config: &TrainConfig,
) -> std::result::Result<TrainedModel, NnError> {
    let refs: Vec<&FeatureWindow> = data.windows.iter().collect();
    let labels: Vec<Label> = data.rows.iter().map(|r| r.label).collect();
    let (tw, tl) = examples(&fold.train, &refs, &labels);
    let (vw, vl) = examples(&fold.validation, &refs, &labels);
    train(arch, config, Examples { windows: &tw, labels: &tl }, Examples { windows: &vw, labels: &vl })
}

fn fold_hash(data: &SetData, fold: &Fold, arch: &Architecture, config: &TrainConfig) -> String {
    let doc = json!({
        "version": crate::VERSION,
        "feature_set": data.set,
        "data_sha256": data.sha256,
        "architecture": arch,
        "train": config,
        "fold": fold,
    });
    sha256_bytes(doc.to_string().as_bytes())
}

fn report_path(dir: &Path, participant: &str) -> PathBuf {
    dir.join(format!("fold_{participant}.json"))
}

fn checkpoint_path(dir: &Path, participant: &str) -> PathBuf {
    dir.join(format!("checkpoint_{participant}.json"))
}

fn is_current(dir: &Path, participant: &str, hash: &str) -> bool {
    let Ok(report) = read_json::<FoldReport>(&report_path(dir, participant)) else {
        return false;
    };
    report.fold_sha256 == hash
        && sha256_file(&checkpoint_path(dir, participant)).is_ok_and(|h| h == report.checkpoint_sha256)
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    data: &SetData,
    fold: &Fold,
    arch: &Architecture,
    config: &TrainConfig,
    hash: &str,
    config_sha: &str,
    dir: &Path,
) -> Result<FoldReport> {
    let model = train_fold(data, fold, arch, config)
        .map_err(|e| MdxError::data(format!("{} fold {}: {e}", data.set, fold.test_participant)))?;
    let ckpt_path = checkpoint_path(dir, &fold.test_participant);
    write_json(&ckpt_path, &Checkpoint::new(&model.params, config, config_sha))?;

    let test_windows: Vec<&FeatureWindow> = fold.test.iter().map(|&i| &data.windows[i]).collect();
    let test_labels: Vec<Label> = fold.test.iter().map(|&i| data.rows[i].label).collect();
    let scores = predict_all(&model.params, &test_windows).map_err(|e| MdxError::internal(e.to_string()))?;
    let m = confusion_metrics(&scores, &test_labels, DEFAULT_THRESHOLD).map_err(|e| MdxError::internal(e.to_string()))?;
    let mut notes = vec!["precision and recall are support-weighted like F1".to_string()];
    let auroc = match auroc(&scores, &test_labels) {
        Ok(a) => Some(a),
        Err(StatsError::SingleClass) => {
            notes.push("AUROC undefined: held-out participant has a single class".into());
            None
        }
        Err(e) => return Err(MdxError::internal(e.to_string())),
    };
    let report = FoldReport {
        feature_set: data.set,
        participant_id: fold.test_participant.clone(),
        fold_index: fold.index,
        fold_sha256: hash.into(),
        metrics: FoldMetrics {
            f1_weighted: m.f1,
            precision_weighted: m.precision,
            recall_weighted: m.recall,
            accuracy: m.accuracy,
            auroc,
        },
        threshold: DEFAULT_THRESHOLD,
        notes,
        n_train: fold.train.len(),
        n_validation: fold.validation.len(),
        n_test: fold.test.len(),
        class_weights: model.class_weights,
        architecture: arch.clone(),
        train: config.clone(),
        best_epoch: model.best_epoch,
        stopped_epoch: model.stopped_epoch,
        best_val_loss: model.best_val_loss,
        curve: model.curve,
        checkpoint_sha256: sha256_file(&ckpt_path)?,
        predictions: fold
            .test
            .iter()
            .zip(&scores)
            .map(|(&i, &score)| Prediction {
                utterance_id: data.rows[i].utterance_id.clone(),
                score,
                label: data.rows[i].label.as_u8(),
            })
            .collect(),
    };
    write_json(&report_path(dir, &fold.test_participant), &report)?;
    Ok(report)
}

fn write_grid_table(path: &Path, result: &GridResult) -> Result<()> {
    tables::write_csv(
        path,
        &[
            "index",
            "learning_rate",
            "batch_size",
            "optimizer",
            "recurrent_layers",
            "dense_layers",
            "dropout",
            "n_params",
            "score",
            "selected",
        ],
        result.rows.iter().map(|r| {
            vec![
                r.index.to_string(),
                r.point.learning_rate.to_string(),
                r.point.batch_size.to_string(),
                r.point.optimizer.name().to_string(),
                r.point.recurrent_layers.to_string(),
                r.point.dense_layers.to_string(),
                r.point.dropout.to_string(),
                r.n_params.to_string(),
                r.score.map_or_else(String::new, |s| s.to_string()),
                u8::from(r.index == result.best).to_string(),
            ]
        }),
    )
}

/// Mean best validation loss over the folds, trained in parallel.
fn grid_score(data: &SetData, folds: &[Fold], arch: &Architecture, config: &TrainConfig) -> std::result::Result<f64, NnError> {
    let losses: std::result::Result<Vec<f64>, NnError> = folds
        .par_iter()
        .map(|f| train_fold(data, f, arch, config).map(|m| m.best_val_loss))
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub participant_id: String,
    pub retrained: bool,
    pub report_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub sets: Vec<(FeatureSet, Vec<FoldOutcome>)>,
    pub manifest_path: PathBuf,
}

pub fn set_dir(cfg: &RunConfig, set: FeatureSet) -> PathBuf {
    cfg.train_dir().join(set.name())
}

/// Trains one model per held-out participant for every configured feature
/// set. Folds whose report and checkpoint match the current inputs are
/// skipped.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let started = unix_now();
    cfg.validate()?;
    let config_sha = cfg.hash();
    let mut inputs = Vec::new();
    let mut summary = Vec::new();
    for &set in &cfg.feature_sets {
        let data = load_set(&cfg.features_dir(), set)?;
        inputs.extend(data.files.iter().cloned());
        let pids: Vec<&str> = data.rows.iter().map(|r| r.participant_id.as_str()).collect();
        let folds = lopo_splits(&pids, cfg.val_fraction, cfg.seed).map_err(|e| MdxError::data(format!("{set}: {e}")))?;
        for f in &folds {
            check_utterance_id(&f.test_participant).map_err(|e| MdxError::data(format!("participant id: {e}")))?;
        }
        let dir = set_dir(cfg, set);
        std::fs::create_dir_all(&dir).map_err(|e| crate::error::write_err(&dir, e))?;

        let mut arch = cfg.architecture.for_set(set);
        let mut config = cfg.train.clone();
        if cfg.grid {
            info!("{set}: grid search over {} points", cfg.grid_spec.len());
            let result = parallel::install(|| grid_search(&cfg.grid_spec, &arch, &config, |a, c| grid_score(&data, &folds, a, c)))
                .map_err(|e| MdxError::data(format!("{set} grid search: {e}")))?;
            write_grid_table(&dir.join("grid.csv"), &result)?;
            arch = result.architecture.clone();
            config = result.config.clone();
        }

        let hashes: Vec<String> = folds.iter().map(|f| fold_hash(&data, f, &arch, &config)).collect();
        let outcomes: Vec<Result<FoldOutcome>> = parallel::install(|| {
            folds
                .par_iter()
                .zip(&hashes)
                .map(|(fold, hash)| {
                    let pid = &fold.test_participant;
                    let retrained = !is_current(&dir, pid, hash);
                    if retrained {
                        info!("{set}: training fold {} (held out {pid})", fold.index);
                        run_fold(&data, fold, &arch, &config, hash, &config_sha, &dir)?;
                    } else {
                        info!("{set}: fold {} (held out {pid}) is up to date", fold.index);
                    }
                    Ok(FoldOutcome {
                        participant_id: pid.clone(),
                        retrained,
                        report_path: report_path(&dir, pid),
                    })
                })
                .collect()
        });
        summary.push((set, outcomes.into_iter().collect::<Result<Vec<_>>>()?));
    }
    let manifest_path = write_manifest(cfg, "train", started, &inputs, &cfg.train_dir())?;
    Ok(TrainSummary {
        sets: summary,
        manifest_path,
    })
}

/// All fold reports under `<out>/train`, ordered by feature set and fold.
pub fn read_fold_reports(cfg: &RunConfig) -> Result<Vec<FoldReport>> {
    let mut reports = Vec::new();
    for path in crate::io::list_files(&cfg.train_dir())? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("fold_") && name.ends_with(".json") {
            reports.push(read_json::<FoldReport>(&path)?);
        }
    }
    reports.sort_by(|a, b| (a.feature_set, a.fold_index).cmp(&(b.feature_set, b.fold_index)));
    Ok(reports)
}

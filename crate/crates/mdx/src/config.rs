//! Run configuration: one JSON document plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use rhotic_core::features::{FeatureSet, SourceConfig};
use rhotic_core::formant::FormantConfig;
use rhotic_core::nn::{Architecture, CellKind, GridSpec, TrainConfig};
use rhotic_core::rng::DEFAULT_SEED;
use rhotic_core::segmentation::DEFAULT_BINS;
use rhotic_core::synth::CorpusSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{MdxError, Result};
use crate::io::sha256_bytes;

/// Architecture without the input width, which follows from the feature
/// set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub cell: CellKind,
    pub recurrent_layers: usize,
    pub hidden_size: usize,
    pub dense_layers: usize,
    pub dense_width: usize,
    pub dropout: f64,
}

impl Default for ArchSpec {
    fn default() -> Self {
        let r = Architecture::reference(1);
        Self {
            cell: r.cell,
            recurrent_layers: r.recurrent_layers,
            hidden_size: r.hidden_size,
            dense_layers: r.dense_layers,
            dense_width: r.dense_width,
            dropout: r.dropout,
        }
    }
}

impl ArchSpec {
    pub fn for_set(&self, set: FeatureSet) -> Architecture {
        Architecture {
            cell: self.cell,
            input_channels: set.n_channels(),
            recurrent_layers: self.recurrent_layers,
            hidden_size: self.hidden_size,
            dense_layers: self.dense_layers,
            dense_width: self.dense_width,
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus manifest CSV. Paths inside it are relative to its directory.
    pub manifest: Option<PathBuf>,
    /// Participant registry CSV (`participant_id,age,sex,formant_ceiling_hz`).
    pub participants: Option<PathBuf>,
    /// Age-and-sex norm table CSV.
    pub norms: Option<PathBuf>,
    pub feature_sets: Vec<FeatureSet>,
    /// TextGrid tier holding the rhotic interval.
    pub tier: String,
    pub bins: usize,
    pub out: PathBuf,
    /// Base seed: network initialization and fold validation draws.
    pub seed: u64,
    pub val_fraction: f64,
    /// Extraction fails when more than this fraction of utterances fail.
    pub max_failure_fraction: f64,
    pub grid: bool,
    pub grid_spec: GridSpec,
    pub architecture: ArchSpec,
    pub train: TrainConfig,
    pub formant: FormantConfig,
    pub source: SourceConfig,
    /// Size of the corpus written by `synth`.
    pub synth_utterances_per_participant: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            participants: None,
            norms: None,
            feature_sets: vec![FeatureSet::Formants5],
            tier: "rhotic".into(),
            bins: DEFAULT_BINS,
            out: PathBuf::from("run"),
            seed: DEFAULT_SEED,
            val_fraction: rhotic_core::dataset::DEFAULT_VAL_FRACTION,
            max_failure_fraction: 0.1,
            grid: false,
            grid_spec: GridSpec::standard(),
            architecture: ArchSpec::default(),
            train: TrainConfig::default(),
            formant: FormantConfig::default(),
            source: SourceConfig::default(),
            synth_utterances_per_participant: CorpusSpec::four_participants(DEFAULT_SEED).utterances_per_participant,
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies `overrides` in
    /// order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| MdxError::usage(format!("{}: {e}", p.display())))?;
                let parsed: RunConfig =
                    serde_json::from_str(&text).map_err(|e| MdxError::usage(format!("{}: {e}", p.display())))?;
                serde_json::to_value(parsed).map_err(|e| MdxError::internal(e.to_string()))?
            }
            None => serde_json::to_value(RunConfig::default()).map_err(|e| MdxError::internal(e.to_string()))?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| MdxError::usage(format!("invalid configuration: {e}")))?;
        cfg.sync();
        Ok(cfg)
    }

    /// Keeps the training seed equal to the run seed.
    pub fn sync(&mut self) {
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_sets.is_empty() {
            return Err(MdxError::usage("feature_sets must not be empty"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(MdxError::usage("val_fraction must lie in (0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(MdxError::usage("max_failure_fraction must lie in [0, 1]"));
        }
        if self.bins == 0 {
            return Err(MdxError::usage("bins must be positive"));
        }
        for set in &self.feature_sets {
            self.architecture
                .for_set(*set)
                .validate()
                .map_err(|e| MdxError::usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Content hash of the settings. Input and output locations are left
    /// out so that identical runs in different places hash alike; the
    /// contents of the inputs are hashed separately.
    pub fn hash(&self) -> String {
        let mut v = self.to_json();
        if let Some(m) = v.as_object_mut() {
            for key in ["out", "manifest", "participants", "norms"] {
                m.remove(key);
            }
        }
        sha256_bytes(v.to_string().as_bytes())
    }

    /// A required input path, or a usage error naming the key.
    pub fn require(&self, key: &str) -> Result<&Path> {
        let p = match key {
            "manifest" => &self.manifest,
            "participants" => &self.participants,
            "norms" => &self.norms,
            _ => unreachable!("unknown path key {key}"),
        };
        p.as_deref()
            .ok_or_else(|| MdxError::usage(format!("configuration needs '{key}' (use --config or --set {key}=PATH)")))
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out.join("features")
    }

    pub fn train_dir(&self) -> PathBuf {
        self.out.join("train")
    }
}

/// Applies `a.b.c=value` to a JSON tree. The key must already exist. The
/// value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| MdxError::usage(format!("--set expects KEY=VALUE, got '{assignment}'")))?;
    let key = key.trim();
    let mut node = &mut *root;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| MdxError::usage(format!("unknown configuration key '{key}'")))?;
    }
    *node = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rhotic_core::nn::OptimizerKind;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_value(c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.train.max_epochs, 50);
        assert_eq!(c.train.patience, 5);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn overrides_parse_json_or_strings() {
        let c = RunConfig::load(
            None,
            &[
                "train.learning_rate=1e-3".into(),
                "train.optimizer=RMSPROP".into(),
                "feature_sets=[\"TV6\",\"FORMANTS5\"]".into(),
                "out=some/dir".into(),
                "seed=11".into(),
                "architecture.cell=BiGRU".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.learning_rate, 1e-3);
        assert_eq!(c.train.optimizer, OptimizerKind::RmsProp);
        assert_eq!(c.feature_sets, vec![FeatureSet::Tv6, FeatureSet::Formants5]);
        assert_eq!(c.out, PathBuf::from("some/dir"));
        assert_eq!(c.train.seed, 11);
        assert_eq!(c.architecture.cell, CellKind::Gru);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        for bad in ["nope=1", "train.nope=1", "train.batch_size=big", "seed"] {
            let e = RunConfig::load(None, &[bad.to_string()]).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn config_file_with_unknown_field_is_rejected() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "bogus": true}"#).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap_err().exit_code(), 1);
        std::fs::write(&p, r#"{"seed": 3}"#).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap().seed, 3);
    }

    #[test]
    fn hash_ignores_locations_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.manifest = Some(PathBuf::from("other/manifest.csv"));
        b.norms = Some(PathBuf::from("other/norms.csv"));
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn reference_architecture_by_default() {
        let a = RunConfig::default().architecture.for_set(FeatureSet::Tv9);
        assert_eq!(a, Architecture::reference(9));
    }
}

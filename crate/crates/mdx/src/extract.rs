//! `extract`: audio, annotations and TV tracks to per-utterance feature
//! caches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use rhotic_core::dataset::derive_label;
use rhotic_core::features::{estimate_source_features, znorm_utterance, FeatureSet, FrameSeries};
use rhotic_core::formant::{formant_transforms, normalize_formants, track_formants, FormantTrack, NormTable, ParticipantProfile, TransformTrack};
use rhotic_core::segmentation::{bin_segment, extract_rhotic_interval, parse_textgrid, BinnedSegment};
use rhotic_core::signal::AudioBuffer;

use crate::config::RunConfig;
use crate::error::{write_err, MdxError, Result};
use crate::io::tables::{self, LabelRow, ManifestRow};
use crate::io::wav::read_wav;
use crate::manifest::{unix_now, write_manifest};
use crate::parallel;

/// Loaded corpus: manifest rows with resolved paths and the registry.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub rows: Vec<ManifestRow>,
    pub base_dir: PathBuf,
    pub participants: BTreeMap<String, ParticipantProfile>,
}

impl Corpus {
    pub fn load(manifest: &Path, participants: &Path) -> Result<Self> {
        let rows = tables::read_manifest(manifest)?;
        let registry: BTreeMap<String, ParticipantProfile> = tables::read_participants(participants)?
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        for r in &rows {
            if !registry.contains_key(&r.participant_id) {
                return Err(MdxError::at(
                    manifest,
                    format!("utterance '{}': participant '{}' is not in the registry", r.utterance_id, r.participant_id),
                ));
            }
        }
        Ok(Self {
            rows,
            base_dir: manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
            participants: registry,
        })
    }

    /// Resolves a manifest path; empty means absent.
    pub fn resolve(&self, p: &str) -> Option<PathBuf> {
        (!p.is_empty()).then(|| self.base_dir.join(p))
    }
}

/// Utterance ids become directory names, so they are restricted.
pub fn check_utterance_id(id: &str) -> std::result::Result<(), String> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(format!("utterance id '{id}' may contain only ASCII letters, digits, '-', '_' and '.'"))
    }
}

/// Location of cached files for one utterance.
pub fn utterance_dir(features_dir: &Path, utterance_id: &str) -> PathBuf {
    features_dir.join(utterance_id)
}

pub fn series_path(features_dir: &Path, utterance_id: &str, set: FeatureSet) -> PathBuf {
    utterance_dir(features_dir, utterance_id).join(format!("{}.csv", set.name()))
}

pub fn binned_path(features_dir: &Path, utterance_id: &str, set: FeatureSet) -> PathBuf {
    utterance_dir(features_dir, utterance_id).join(format!("{}.binned.csv", set.name()))
}

pub fn labels_path(features_dir: &Path) -> PathBuf {
    features_dir.join("labels.csv")
}

/// Everything computed for one utterance, before anything is written.
struct Extracted {
    label: LabelRow,
    formants: Option<(FormantTrack, TransformTrack)>,
    series: Vec<(FeatureSet, FrameSeries, Option<BinnedSegment>)>,
}

struct Shared<'a> {
    cfg: &'a RunConfig,
    corpus: &'a Corpus,
    norms: Option<&'a NormTable>,
}

fn extract_one(sh: &Shared<'_>, row: &ManifestRow) -> std::result::Result<Extracted, String> {
    check_utterance_id(&row.utterance_id)?;
    let label = derive_label(row.avg_rating).map_err(|e| e.to_string())?;
    let profile = &sh.corpus.participants[&row.participant_id];
    let sets = &sh.cfg.feature_sets;

    let needs_audio =
        sets.iter().any(|s| s.needs_formants()) || sets.iter().any(|s| matches!(s, FeatureSet::Tv9 | FeatureSet::Fused14));
    let audio: Option<AudioBuffer> = if needs_audio {
        let p = sh.corpus.resolve(&row.audio_path).ok_or("no audio path")?;
        Some(read_wav(&p).map_err(|e| e.to_string())?)
    } else {
        None
    };

    let mut formants = None;
    let mut f5 = None;
    if sets.iter().any(|s| s.needs_formants()) {
        let norms = sh.norms.expect("norms are loaded when formants are needed");
        let track = track_formants(audio.as_ref().unwrap(), profile, &sh.cfg.formant).map_err(|e| e.to_string())?;
        let transforms = formant_transforms(&track).map_err(|e| e.to_string())?;
        f5 = Some(normalize_formants(&track, &transforms, norms).map_err(|e| e.to_string())?);
        formants = Some((track, transforms));
    }

    let mut tv6 = None;
    let mut tv9 = None;
    if sets.iter().any(|s| s.needs_tvs()) {
        let p = sh.corpus.resolve(&row.tv_path).ok_or("no TV track path")?;
        let raw = tables::read_tv_track(&p).map_err(|e| e.to_string())?;
        let six = FrameSeries::with_feature_set(FeatureSet::Tv6, raw.channels()[..6].to_vec(), raw.frame_rate(), raw.start_time())
            .map_err(|e| e.to_string())?;
        tv6 = Some(znorm_utterance(&six).map_err(|e| e.to_string())?);
        if sets.iter().any(|s| matches!(s, FeatureSet::Tv9 | FeatureSet::Fused14)) {
            let nine = if raw.n_channels() == 9 {
                raw
            } else {
                let source = estimate_source_features(audio.as_ref().unwrap(), &sh.cfg.source);
                six.concat(&source, FeatureSet::Tv9).map_err(|e| e.to_string())?
            };
            tv9 = Some(znorm_utterance(&nine).map_err(|e| e.to_string())?);
        }
    }

    let interval = match sh.corpus.resolve(&row.textgrid_path) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            let grid = parse_textgrid(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(extract_rhotic_interval(&grid, &sh.cfg.tier).map_err(|e| format!("{}: {e}", p.display()))?)
        }
        None => None,
    };

    let mut series = Vec::new();
    for &set in sets {
        let s = match set {
            FeatureSet::Formants5 => f5.clone().unwrap(),
            FeatureSet::Tv6 => tv6.clone().unwrap(),
            FeatureSet::Tv9 => tv9.clone().unwrap(),
            FeatureSet::Fused14 => f5.as_ref().unwrap().concat(tv9.as_ref().unwrap(), set).map_err(|e| e.to_string())?,
        };
        let binned = match &interval {
            Some(iv) => Some(bin_segment(&s, iv, sh.cfg.bins).map_err(|e| format!("{set}: {e}"))?),
            None => None,
        };
        series.push((set, s, binned));
    }
    Ok(Extracted {
        label: LabelRow {
            utterance_id: row.utterance_id.clone(),
            participant_id: row.participant_id.clone(),
            avg_rating: row.avg_rating,
            label,
        },
        formants,
        series,
    })
}

fn write_extracted(features_dir: &Path, e: &Extracted) -> Result<()> {
    let id = &e.label.utterance_id;
    if let Some((track, transforms)) = &e.formants {
        tables::write_formant_track(&utterance_dir(features_dir, id).join("formants.csv"), track, transforms)?;
    }
    for (set, s, binned) in &e.series {
        tables::write_series(&series_path(features_dir, id, *set), s)?;
        if let Some(b) = binned {
            tables::write_binned(&binned_path(features_dir, id, *set), b)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub extracted: usize,
    /// `(utterance_id, reason)` in manifest order.
    pub failures: Vec<(String, String)>,
    pub manifest_path: PathBuf,
}

/// Extracts every utterance of the corpus into `<out>/features`.
///
/// Preconditions (manifest, registry and, for formant sets, the norm table)
/// are checked before anything is written. Individual utterances may fail
/// without affecting the others; the command fails only when the failed
/// fraction exceeds `max_failure_fraction`.
pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractSummary> {
    let started = unix_now();
    cfg.validate()?;
    let manifest = cfg.require("manifest")?;
    let participants = cfg.require("participants")?;
    let norms = if cfg.feature_sets.iter().any(|s| s.needs_formants()) {
        let p = cfg.require("norms")?;
        if !p.is_file() {
            return Err(MdxError::data(format!("norm table {} not found", p.display())));
        }
        Some(tables::read_norms(p)?)
    } else {
        None
    };
    let corpus = Corpus::load(manifest, participants)?;
    if corpus.rows.is_empty() {
        return Err(MdxError::at(manifest, "no utterances"));
    }

    let features_dir = cfg.features_dir();
    if features_dir.exists() {
        std::fs::remove_dir_all(&features_dir).map_err(|e| write_err(&features_dir, e))?;
    }
    let shared = Shared {
        cfg,
        corpus: &corpus,
        norms: norms.as_ref(),
    };
    let results: Vec<std::result::Result<Extracted, String>> =
        parallel::install(|| corpus.rows.par_iter().map(|r| extract_one(&shared, r)).collect());

    let mut labels = Vec::new();
    let mut failures = Vec::new();
    for (row, res) in corpus.rows.iter().zip(results) {
        match res {
            Ok(e) => {
                write_extracted(&features_dir, &e)?;
                labels.push(e.label);
            }
            Err(reason) => {
                warn!("utterance {}: {reason}", row.utterance_id);
                failures.push((row.utterance_id.clone(), reason));
            }
        }
    }
    tables::write_labels(&labels_path(&features_dir), &labels)?;
    tables::write_csv(
        &features_dir.join("failures.csv"),
        &["utterance_id", "reason"],
        failures.iter().map(|(u, r)| vec![u.clone(), r.clone()]),
    )?;

    let mut inputs = vec![manifest.to_path_buf(), participants.to_path_buf()];
    inputs.extend(norms.as_ref().and(cfg.norms.clone()));
    for r in &corpus.rows {
        for p in [&r.audio_path, &r.textgrid_path, &r.tv_path] {
            if let Some(p) = corpus.resolve(p).filter(|p| p.is_file()) {
                inputs.push(p);
            }
        }
    }
    let manifest_path = write_manifest(cfg, "extract", started, &inputs, &features_dir)?;
    info!("extracted {} of {} utterances", labels.len(), corpus.rows.len());

    let n = corpus.rows.len();
    if failures.len() as f64 > cfg.max_failure_fraction * n as f64 {
        return Err(MdxError::data(format!(
            "{} of {n} utterances failed (limit {}%); see {}",
            failures.len(),
            cfg.max_failure_fraction * 100.0,
            features_dir.join("failures.csv").display()
        )));
    }
    Ok(ExtractSummary {
        extracted: labels.len(),
        failures,
        manifest_path,
    })
}

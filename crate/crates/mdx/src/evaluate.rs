//! `evaluate`: aggregate fold reports into per-feature-set summaries.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rhotic_core::features::FeatureSet;
use rhotic_core::formant::ParticipantProfile;
use rhotic_core::stats::{aggregate, spearman_exact, SpearmanResult, Summary, MAX_EXACT_N};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{MdxError, Result};
use crate::io::tables;
use crate::io::write_json;
use crate::manifest::{unix_now, write_manifest};
use crate::train::{read_fold_reports, FoldReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetAggregate {
    pub feature_set: FeatureSet,
    pub n_folds: usize,
    pub f1_weighted: Summary,
    pub precision_weighted: Summary,
    pub recall_weighted: Summary,
    /// Over folds where AUROC is defined.
    pub auroc: Option<Summary>,
    /// Rank correlation of participant age with AUROC.
    pub age_auroc_spearman: Option<SpearmanResult>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sets: Vec<SetAggregate>,
}

fn summary(values: &[f64]) -> Result<Summary> {
    aggregate(values).map_err(|e| MdxError::internal(e.to_string()))
}

fn aggregate_set(set: FeatureSet, folds: &[&FoldReport], registry: &BTreeMap<String, ParticipantProfile>) -> Result<SetAggregate> {
    let pick = |f: fn(&FoldReport) -> f64| folds.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let with_auroc: Vec<(&str, f64)> = folds
        .iter()
        .filter_map(|r| r.metrics.auroc.map(|a| (r.participant_id.as_str(), a)))
        .collect();
    let mut notes = Vec::new();
    if with_auroc.len() < folds.len() {
        notes.push(format!("AUROC undefined for {} of {} folds", folds.len() - with_auroc.len(), folds.len()));
    }
    let auroc = if with_auroc.is_empty() {
        None
    } else {
        Some(summary(&with_auroc.iter().map(|x| x.1).collect::<Vec<_>>())?)
    };

    let aged: Vec<(f64, f64)> = with_auroc
        .iter()
        .filter_map(|(p, a)| registry.get(*p).map(|prof| (prof.age, *a)))
        .collect();
    let age_auroc_spearman = if registry.is_empty() {
        notes.push("no participant registry configured; age correlation skipped".into());
        None
    } else if aged.len() < 2 || aged.len() > MAX_EXACT_N {
        notes.push(format!(
            "age correlation needs 2 to {MAX_EXACT_N} participants with AUROC, got {}",
            aged.len()
        ));
        None
    } else {
        let (ages, aurocs): (Vec<f64>, Vec<f64>) = aged.into_iter().unzip();
        Some(spearman_exact(&ages, &aurocs).map_err(|e| MdxError::internal(e.to_string()))?)
    };
    Ok(SetAggregate {
        feature_set: set,
        n_folds: folds.len(),
        f1_weighted: summary(&pick(|r| r.metrics.f1_weighted))?,
        precision_weighted: summary(&pick(|r| r.metrics.precision_weighted))?,
        recall_weighted: summary(&pick(|r| r.metrics.recall_weighted))?,
        auroc,
        age_auroc_spearman,
        notes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Aggregates every fold report under `<out>/train` and writes
/// `<out>/evaluate/{report.json, per_participant.csv, age_auroc_<SET>.csv}`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    let started = unix_now();
    let reports = read_fold_reports(cfg)?;
    if reports.is_empty() {
        return Err(MdxError::data(format!("no fold reports found under {}", cfg.train_dir().display())));
    }
    let registry: BTreeMap<String, ParticipantProfile> = match &cfg.participants {
        Some(p) => tables::read_participants(p)?.into_iter().map(|p| (p.id.clone(), p)).collect(),
        None => BTreeMap::new(),
    };
    let mut by_set: BTreeMap<FeatureSet, Vec<&FoldReport>> = BTreeMap::new();
    for r in &reports {
        by_set.entry(r.feature_set).or_default().push(r);
    }
    let dir = cfg.out.join("evaluate");
    let mut sets = Vec::new();
    for (set, folds) in &by_set {
        sets.push(aggregate_set(*set, folds, &registry)?);
        if !registry.is_empty() {
            tables::write_csv(
                &dir.join(format!("age_auroc_{}.csv", set.name())),
                &["participant", "age", "sex", "auroc"],
                folds.iter().filter_map(|r| {
                    registry.get(&r.participant_id).map(|p| {
                        vec![p.id.clone(), p.age.to_string(), p.sex.as_str().to_string(), opt(r.metrics.auroc)]
                    })
                }),
            )?;
        }
    }
    tables::write_csv(
        &dir.join("per_participant.csv"),
        &["feature_set", "participant", "f1_weighted", "precision_weighted", "recall_weighted", "auroc"],
        reports.iter().map(|r| {
            vec![
                r.feature_set.name().to_string(),
                r.participant_id.clone(),
                r.metrics.f1_weighted.to_string(),
                r.metrics.precision_weighted.to_string(),
                r.metrics.recall_weighted.to_string(),
                opt(r.metrics.auroc),
            ]
        }),
    )?;
    let report = EvaluationReport { sets };
    write_json(&dir.join("report.json"), &report)?;
    let inputs: Vec<PathBuf> = crate::io::list_files(&cfg.train_dir())?
        .into_iter()
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("fold_")))
        .chain(cfg.participants.clone())
        .collect();
    write_manifest(cfg, "evaluate", started, &inputs, &dir)?;
    Ok(report)
}

//! `analyze`: per-channel effect sizes and binned class trajectories.

use std::path::PathBuf;

use rhotic_core::dataset::Label;
use rhotic_core::features::FeatureSet;
use rhotic_core::stats::{cohens_d, trajectory_with_ci, EffectSizeResult};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{MdxError, Result};
use crate::extract::{binned_path, labels_path};
use crate::io::tables;
use crate::io::write_json;
use crate::manifest::{unix_now, write_manifest};

pub const SIGN_CONVENTION: &str = "d = (derhotic mean - fully rhotic mean) / pooled SD over all bin values";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEffect {
    pub channel: String,
    #[serde(flatten)]
    pub effect: EffectSizeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub feature_set: FeatureSet,
    pub sign_convention: String,
    pub bins: usize,
    /// Segments per class: (derhotic, fully rhotic).
    pub segments: (usize, usize),
    pub effects: Vec<ChannelEffect>,
}

impl AnalysisReport {
    /// The channel with the largest |d|.
    pub fn strongest(&self) -> &ChannelEffect {
        self.effects
            .iter()
            .max_by(|a, b| a.effect.d.abs().total_cmp(&b.effect.d.abs()))
            .expect("at least one channel")
    }
}

/// Effect sizes for every channel of every configured feature set, from the
/// binned segments written by `extract`.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Vec<AnalysisReport>> {
    let started = unix_now();
    cfg.validate()?;
    let features = cfg.features_dir();
    let lp = labels_path(&features);
    if !lp.is_file() {
        return Err(MdxError::data(format!("{} not found (run extract first)", lp.display())));
    }
    let labels = tables::read_labels(&lp)?;
    let mut inputs = vec![lp];
    let dir = cfg.out.join("analyze");
    let mut reports = Vec::new();
    for &set in &cfg.feature_sets {
        // per class, per channel: one bin vector per segment
        let n_ch = set.n_channels();
        let mut segs: [Vec<Vec<Vec<f64>>>; 2] = [vec![Vec::new(); n_ch], vec![Vec::new(); n_ch]];
        let mut n_bins = None;
        for r in &labels {
            let p = binned_path(&features, &r.utterance_id, set);
            if !p.is_file() {
                continue;
            }
            let seg = tables::read_binned(&p)?;
            if seg.channel_names != set.channel_names() {
                return Err(MdxError::at(&p, "channels do not match the feature set"));
            }
            if *n_bins.get_or_insert(seg.n_bins()) != seg.n_bins() {
                return Err(MdxError::at(&p, "inconsistent bin count"));
            }
            let class = r.label.as_u8() as usize;
            for (c, per_class) in segs[class].iter_mut().enumerate() {
                per_class.push(seg.channel(c));
            }
            inputs.push(p);
        }
        let counts = (segs[0][0].len(), segs[1][0].len());
        if counts.0 == 0 || counts.1 == 0 {
            return Err(MdxError::data(format!(
                "{set}: effect sizes need segments of both classes (derhotic {}, fully rhotic {})",
                counts.0, counts.1
            )));
        }
        let names = set.channel_names();
        let mut effects = Vec::with_capacity(n_ch);
        let mut trajectory_rows = Vec::new();
        for (c, name) in names.iter().enumerate() {
            let pooled = |class: usize| segs[class][c].iter().flatten().copied().collect::<Vec<f64>>();
            let effect = cohens_d(&pooled(0), &pooled(1)).map_err(|e| MdxError::data(format!("{set} {name}: {e}")))?;
            effects.push(ChannelEffect {
                channel: name.to_string(),
                effect,
            });
            for (class, label) in [(0, Label::Derhotic), (1, Label::Rhotic)] {
                let points = trajectory_with_ci(&segs[class][c]).map_err(|e| MdxError::data(format!("{set} {name}: {e}")))?;
                for p in points {
                    trajectory_rows.push(vec![
                        p.bin.to_string(),
                        name.to_string(),
                        label.as_u8().to_string(),
                        p.mean.to_string(),
                        p.ci_low.to_string(),
                        p.ci_high.to_string(),
                    ]);
                }
            }
        }
        let set_dir = dir.join(set.name());
        tables::write_csv(
            &set_dir.join("trajectory.csv"),
            &["bin", "channel", "class", "mean", "ci_low", "ci_high"],
            trajectory_rows,
        )?;
        tables::write_csv(
            &set_dir.join("effect_sizes.csv"),
            &["channel", "d", "ci_low", "ci_high", "n0", "n1", "label"],
            effects.iter().map(|e| {
                vec![
                    e.channel.clone(),
                    e.effect.d.to_string(),
                    e.effect.ci_low.to_string(),
                    e.effect.ci_high.to_string(),
                    e.effect.n0.to_string(),
                    e.effect.n1.to_string(),
                    e.effect.label.as_str().to_string(),
                ]
            }),
        )?;
        let report = AnalysisReport {
            feature_set: set,
            sign_convention: SIGN_CONVENTION.into(),
            bins: n_bins.unwrap_or(cfg.bins),
            segments: counts,
            effects,
        };
        write_json(&set_dir.join("effect_sizes.json"), &report)?;
        reports.push(report);
    }
    let inputs: Vec<PathBuf> = inputs;
    write_manifest(cfg, "analyze", started, &inputs, &dir)?;
    Ok(reports)
}

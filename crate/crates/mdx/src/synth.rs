//! `synth`: writes a synthetic corpus in the layout `extract` reads.

use std::path::{Path, PathBuf};


use rhotic_core::features::pseudo_invert;
use rhotic_core::formant::{formant_transforms, normalize_formants};
use rhotic_core::segmentation::{serialize_textgrid, Interval, IntervalTier, TextGrid};
use rhotic_core::synth::{generate_corpus, illustrative_norm_table, CorpusSpec, SynthUtterance};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{write_err, MdxError, Result};
use crate::io::tables::{self, ManifestRow};
use crate::io::wav::write_wav;
use crate::io::write_json;
use crate::manifest::{unix_now, write_manifest};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub utterances: usize,
    pub rhotic: usize,
    /// Config pointing at the generated files.
    pub config_path: PathBuf,
}

fn textgrid_for(u: &SynthUtterance, duration: f64, tier: &str) -> TextGrid {
    let iv = &u.interval;
    let interval = |xmin, xmax, text: &str| Interval {
        xmin,
        xmax,
        text: text.to_string(),
    };
    TextGrid {
        xmin: 0.0,
        xmax: duration,
        tiers: vec![IntervalTier {
            name: tier.to_string(),
            xmin: 0.0,
            xmax: duration,
            intervals: vec![
                interval(0.0, iv.start_s, ""),
                interval(iv.start_s, iv.end_s, "r"),
                interval(iv.end_s, duration, ""),
            ],
        }],
        skipped_tiers: Vec::new(),
    }
}

#[derive(Serialize)]
struct CorpusPointer<'a> {
    manifest: &'a Path,
    participants: &'a Path,
    norms: &'a Path,
    seed: u64,
}

/// Generates the four-speaker corpus for `cfg.seed` under `<out>/corpus`.
///
/// TV tracks are the pseudo-inverse of the normalized target formants, so
/// they carry the same class difference as the audio.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    let started = unix_now();
    let dir = cfg.out.join("corpus");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| write_err(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| write_err(&dir, e))?;
    let dir = std::path::absolute(&dir).map_err(|e| write_err(&dir, e))?;
    if cfg.synth_utterances_per_participant == 0 {
        return Err(MdxError::usage("synth_utterances_per_participant must be positive"));
    }
    let mut spec = CorpusSpec::four_participants(cfg.seed);
    spec.utterances_per_participant = cfg.synth_utterances_per_participant;
    let norms = illustrative_norm_table();
    let corpus = generate_corpus(&spec, &norms).map_err(|e| MdxError::internal(e.to_string()))?;

    let mut rows = Vec::with_capacity(corpus.len());
    for u in &corpus {
        let participant = spec
            .participants
            .iter()
            .find(|p| p.id == u.participant_id)
            .ok_or_else(|| MdxError::internal("utterance without participant"))?;
        let audio = u.render(spec.sample_rate);
        let wav = format!("wav/{}.wav", u.utterance_id);
        write_wav(&dir.join(&wav), &audio)?;

        let grid = textgrid_for(u, audio.duration_s(), &cfg.tier);
        let tg = format!("textgrid/{}.TextGrid", u.utterance_id);
        let tg_path = dir.join(&tg);
        if let Some(parent) = tg_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| write_err(parent, e))?;
        }
        std::fs::write(&tg_path, serialize_textgrid(&grid)).map_err(|e| write_err(&tg_path, e))?;

        let track = u.true_track(participant);
        let fail = |e: &dyn std::fmt::Display| MdxError::internal(format!("{}: {e}", u.utterance_id));
        let transforms = formant_transforms(&track).map_err(|e| fail(&e))?;
        let f5 = normalize_formants(&track, &transforms, &norms).map_err(|e| fail(&e))?;
        let tv_series = pseudo_invert(&f5).map_err(|e| fail(&e))?;
        let tv = format!("tv/{}.csv", u.utterance_id);
        tables::write_series(&dir.join(&tv), &tv_series)?;

        rows.push(ManifestRow {
            utterance_id: u.utterance_id.clone(),
            participant_id: u.participant_id.clone(),
            avg_rating: u.avg_rating,
            audio_path: wav,
            textgrid_path: tg,
            tv_path: tv,
        });
    }
    let manifest = dir.join("manifest.csv");
    let participants = dir.join("participants.csv");
    let norms_path = dir.join("norms.csv");
    tables::write_manifest(&manifest, &rows)?;
    tables::write_participants(&participants, &spec.participants)?;
    tables::write_norms(&norms_path, &norms)?;
    let config_path = dir.join("config.json");
    write_json(
        &config_path,
        &CorpusPointer {
            manifest: &manifest,
            participants: &participants,
            norms: &norms_path,
            seed: cfg.seed,
        },
    )?;
    write_manifest(cfg, "synth", started, &[], &dir)?;
    Ok(SynthSummary {
        dir,
        utterances: corpus.len(),
        rhotic: corpus.iter().filter(|u| u.label.as_u8() == 1).count(),
        config_path,
    })
}

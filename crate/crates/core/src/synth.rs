//! Synthetic vowels and labelled corpora with a known class difference.
//!
//! Audio is a glottal pulse train at `f0` driven through three cascaded
//! two-pole resonators, so the true formants are exactly the resonator
//! settings. The pulses are shaped like the source of a Klatt cascade
//! synthesizer: an impulse train low-passed by a resonator at 0 Hz with a
//! 100 Hz bandwidth, then differenced for lip radiation. The
//! corpus generator draws per-frame formant trajectories in norm-relative
//! z units, converts them to Hz with a [`NormTable`], and for rhotic
//! utterances raises F2 inside the labelled interval so that z(F3−F2) drops
//! by a set number of norm SDs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dataset::{derive_label, Label};
use crate::formant::{
    FormantError, FormantFrame, FormantTrack, NormRow, NormStat, NormTable, ParticipantProfile, Resonance, Sex,
};
use crate::rng::{self, Rng};
use crate::segmentation::RhoticInterval;
use crate::signal::AudioBuffer;
use crate::FRAME_RATE_HZ;

/// A steady vowel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelSpec {
    pub formants: [f64; 3],
    pub bandwidths: [f64; 3],
    pub f0: f64,
    pub sample_rate: u32,
    pub duration_s: f64,
}

impl VowelSpec {
    /// Random vowel with formants at least 300 Hz apart, bandwidths below
    /// 200 Hz and F3 under 3.5 kHz.
    pub fn random(rng: &mut Rng) -> Self {
        let f1 = rng::uniform(rng, 300.0, 900.0);
        let f2 = rng::uniform(rng, (f1 + 300.0).max(900.0), 2300.0);
        let f3 = rng::uniform(rng, (f2 + 300.0).max(2200.0), 3500.0);
        Self {
            formants: [f1, f2, f3],
            bandwidths: [
                rng::uniform(rng, 40.0, 120.0),
                rng::uniform(rng, 50.0, 150.0),
                rng::uniform(rng, 60.0, 190.0),
            ],
            f0: rng::uniform(rng, 100.0, 160.0),
            sample_rate: 16000,
            duration_s: 0.4,
        }
    }
}

/// Two-pole resonator `y[n] = x[n] + b1·y[n−1] + b2·y[n−2]`.
#[derive(Debug, Clone, Copy, Default)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn step(&mut self, x: f64, freq: f64, bw: f64, fs: f64) -> f64 {
        let r = libm::exp(-PI * bw / fs);
        let b1 = 2.0 * r * libm::cos(2.0 * PI * freq / fs);
        let b2 = -r * r;
        let y = x + b1 * self.y1 + b2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn impulse_train(n: usize, f0: f64, fs: f64) -> Vec<f64> {
    let period = fs / f0;
    let mut out = vec![0.0; n];
    let mut next = 0.0;
    while (next as usize) < n {
        out[next as usize] = 1.0;
        next += period;
    }
    out
}

/// Bandwidth of the glottal low-pass resonator (centre 0 Hz).
const GLOTTAL_BANDWIDTH_HZ: f64 = 100.0;

fn glottal_source(n: usize, f0: f64, fs: f64) -> Vec<f64> {
    let mut out = impulse_train(n, f0, fs);
    let mut glottis = Resonator::default();
    let mut prev = 0.0;
    for s in out.iter_mut() {
        let g = glottis.step(*s, 0.0, GLOTTAL_BANDWIDTH_HZ, fs);
        *s = g - prev;
        prev = g;
    }
    out
}

fn normalize_peak(samples: &mut [f64], peak: f64) {
    let max = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for s in samples {
            *s *= peak / max;
        }
    }
}

pub fn synthesize_vowel(spec: &VowelSpec) -> AudioBuffer {
    let fs = spec.sample_rate as f64;
    let n = libm::round(spec.duration_s * fs) as usize;
    let mut samples = glottal_source(n, spec.f0, fs);
    for k in 0..3 {
        let mut res = Resonator::default();
        for s in samples.iter_mut() {
            *s = res.step(*s, spec.formants[k], spec.bandwidths[k], fs);
        }
    }
    normalize_peak(&mut samples, 0.5);
    AudioBuffer::new(samples, spec.sample_rate).expect("positive rate and finite samples")
}

/// Renders per-frame formant targets (one row per 10 ms frame) with
/// resonator settings interpolated linearly between frame centres.
pub fn synthesize_trajectory(formants: &[[f64; 3]], bandwidths: [f64; 3], f0: f64, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let per_frame = fs / FRAME_RATE_HZ;
    let n = libm::round(formants.len() as f64 * per_frame) as usize;
    let mut samples = glottal_source(n, f0, fs);
    let target = |i: usize, k: usize| {
        // position in frames, measured from the first frame centre
        let pos = (i as f64 / per_frame).min((formants.len() - 1) as f64);
        let lo = libm::floor(pos) as usize;
        let hi = (lo + 1).min(formants.len() - 1);
        let w = pos - lo as f64;
        formants[lo][k] * (1.0 - w) + formants[hi][k] * w
    };
    for k in 0..3 {
        let mut res = Resonator::default();
        for (i, s) in samples.iter_mut().enumerate() {
            *s = res.step(*s, target(i, k), bandwidths[k], fs);
        }
    }
    normalize_peak(&mut samples, 0.5);
    AudioBuffer::new(samples, sample_rate).expect("positive rate and finite samples")
}

/// Smoothly age-graded child norms for ages 7–18. Illustrative values only,
/// not published reference data.
pub fn illustrative_norm_table() -> NormTable {
    let mut rows = Vec::new();
    for sex in [Sex::Female, Sex::Male] {
        for age in 7u32..=18 {
            let years = (age - 7) as f64;
            // male formants fall faster after puberty onset
            let drop = if sex == Sex::Male { years + (years - 5.0).max(0.0) * 1.5 } else { years };
            rows.push(NormRow {
                age,
                sex,
                f1: NormStat { mean: 820.0 - 12.0 * drop, sd: 90.0 },
                f2: NormStat { mean: 2150.0 - 35.0 * drop, sd: 200.0 },
                f3: NormStat { mean: 3250.0 - 40.0 * drop, sd: 220.0 },
            });
        }
    }
    NormTable::new(rows).expect("generated rows are contiguous with positive SDs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub participants: Vec<ParticipantProfile>,
    pub utterances_per_participant: usize,
    /// Probability that an utterance is rhotic.
    pub rhotic_rate: f64,
    /// Drop of z(F3−F2) inside the interval for rhotic utterances.
    pub shift_sd: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub min_interval_frames: usize,
    pub max_interval_frames: usize,
    /// SD of the per-utterance z offset of each formant.
    pub offset_sd: f64,
    /// AR(1) frame noise on each formant in z units.
    pub noise_rho: f64,
    pub noise_sd: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl CorpusSpec {
    /// Four speakers spanning the reference age range.
    pub fn four_participants(seed: u64) -> Self {
        let p = |id: &str, age, sex, ceiling| ParticipantProfile::new(id, age, sex, ceiling).expect("valid profile");
        Self {
            participants: vec![
                p("s01", 9.3, Sex::Female, 6000.0),
                p("s02", 11.8, Sex::Male, 5000.0),
                p("s03", 14.5, Sex::Female, 5000.0),
                p("s04", 15.7, Sex::Male, 5000.0),
            ],
            utterances_per_participant: 40,
            rhotic_rate: 0.4,
            shift_sd: 0.8,
            min_frames: 90,
            max_frames: 170,
            min_interval_frames: 20,
            max_interval_frames: 40,
            offset_sd: 0.25,
            noise_rho: 0.8,
            noise_sd: 0.15,
            sample_rate: 16000,
            seed,
        }
    }
}

/// One generated utterance with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthUtterance {
    pub utterance_id: String,
    pub participant_id: String,
    pub avg_rating: f64,
    pub label: Label,
    pub interval: RhoticInterval,
    /// Target F1–F3 in Hz per 10 ms frame; frame `k` is centred at `k / 100` s.
    pub formants_hz: Vec<[f64; 3]>,
    pub bandwidths: [f64; 3],
    pub f0: f64,
}

impl SynthUtterance {
    pub fn render(&self, sample_rate: u32) -> AudioBuffer {
        synthesize_trajectory(&self.formants_hz, self.bandwidths, self.f0, sample_rate)
    }

    /// The target trajectory as a formant track (frame `k` at `k / 100` s).
    pub fn true_track(&self, participant: &ParticipantProfile) -> FormantTrack {
        let frames = self
            .formants_hz
            .iter()
            .enumerate()
            .map(|(k, f)| FormantFrame {
                time: k as f64 / FRAME_RATE_HZ,
                formants: Some([0, 1, 2].map(|i| Resonance {
                    frequency: f[i],
                    bandwidth: self.bandwidths[i],
                })),
            })
            .collect();
        FormantTrack {
            frames,
            participant: participant.clone(),
        }
    }
}

fn rating_for(rng: &mut Rng, rhotic: bool) -> f64 {
    // five raters, so averages are multiples of 0.2; class 1 needs ≥ 4 votes
    let votes = if rhotic {
        4 + usize::from(rng::uniform(rng, 0.0, 1.0) < 0.5)
    } else {
        libm::floor(rng::uniform(rng, 0.0, 4.0)) as usize
    };
    votes as f64 / 5.0
}

/// Generates the corpus. Participants are processed in order, each from its
/// own derived random stream.
pub fn generate_corpus(spec: &CorpusSpec, norms: &NormTable) -> Result<Vec<SynthUtterance>, FormantError> {
    let mut out = Vec::with_capacity(spec.participants.len() * spec.utterances_per_participant);
    for (pi, participant) in spec.participants.iter().enumerate() {
        let row = norms.lookup(participant.age, participant.sex)?.clone();
        let mut rng = rng::seeded(rng::derive_seed(spec.seed, pi as u64));
        for u in 0..spec.utterances_per_participant {
            out.push(generate_utterance(spec, &row, participant, u, &mut rng));
        }
    }
    Ok(out)
}

fn generate_utterance(
    spec: &CorpusSpec,
    row: &NormRow,
    participant: &ParticipantProfile,
    index: usize,
    rng: &mut Rng,
) -> SynthUtterance {
    let rhotic = rng::uniform(rng, 0.0, 1.0) < spec.rhotic_rate;
    let avg_rating = rating_for(rng, rhotic);
    let label = derive_label(avg_rating).expect("ratings lie in [0, 1]");
    let n = spec.min_frames + (rng::uniform(rng, 0.0, (spec.max_frames - spec.min_frames + 1) as f64) as usize);
    let len = spec.min_interval_frames
        + (rng::uniform(rng, 0.0, (spec.max_interval_frames - spec.min_interval_frames + 1) as f64) as usize);
    let slack = (n - len) / 4;
    let start = (n - len) / 2 - slack + (rng::uniform(rng, 0.0, (2 * slack + 1) as f64) as usize);

    let stats = [row.f1, row.f2, row.f3];
    let offsets = [0, 1, 2].map(|_| spec.offset_sd * rng::normal(rng));
    let innovation = spec.noise_sd * libm::sqrt(1.0 - spec.noise_rho * spec.noise_rho);
    let mut ar = [0, 1, 2].map(|_| spec.noise_sd * rng::normal(rng));
    let f2_shift_hz = spec.shift_sd * row.f3_minus_f2().sd;

    let formants_hz = (0..n)
        .map(|k| {
            let mut f = [0.0; 3];
            for i in 0..3 {
                if k > 0 {
                    ar[i] = spec.noise_rho * ar[i] + innovation * rng::normal(rng);
                }
                f[i] = stats[i].mean + stats[i].sd * (offsets[i] + ar[i]);
            }
            if label == Label::Rhotic && (start..start + len).contains(&k) {
                f[1] += f2_shift_hz;
            }
            // keep the resonances apart and inside a sensible range
            f[0] = f[0].max(250.0);
            f[1] = f[1].max(f[0] + 300.0);
            f[2] = f[2].max(f[1] + 300.0);
            f
        })
        .collect();

    let bandwidths = [
        rng::uniform(rng, 50.0, 90.0),
        rng::uniform(rng, 60.0, 110.0),
        rng::uniform(rng, 80.0, 150.0),
    ];
    // interval edges at frame boundaries half a frame before/after the centres
    let edge = |k: usize| (k as f64 - 0.5).max(0.0) / FRAME_RATE_HZ;
    SynthUtterance {
        utterance_id: format!("{}_u{:03}", participant.id, index),
        participant_id: participant.id.clone(),
        avg_rating,
        label,
        interval: RhoticInterval::new(edge(start), edge(start + len), "r").expect("len ≥ 1"),
        formants_hz,
        bandwidths,
        f0: rng::uniform(rng, 100.0, 150.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formant::{formant_transforms, normalize_formants};

    extern crate std;

    #[test]
    fn resonator_peak_at_formant() {
        // single resonator impulse response: spectral peak near the setting
        let fs = 16000.0;
        let mut res = Resonator::default();
        let h: Vec<f64> = (0..4096).map(|i| res.step(if i == 0 { 1.0 } else { 0.0 }, 1000.0, 80.0, fs)).collect();
        let mag = |f: f64| {
            let w = 2.0 * PI * f / fs;
            let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(a, b), (n, v)| {
                (a + v * libm::cos(w * n as f64), b - v * libm::sin(w * n as f64))
            });
            libm::sqrt(re * re + im * im)
        };
        let best = (500..1500).step_by(5).map(|f| (f, mag(f as f64))).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((best.0 as f64 - 1000.0).abs() <= 10.0, "peak at {}", best.0);
    }

    #[test]
    fn vowel_is_deterministic_and_bounded() {
        let mut r = rng::seeded(3);
        let spec = VowelSpec::random(&mut r);
        let a = synthesize_vowel(&spec);
        assert_eq!(a, synthesize_vowel(&spec));
        assert!(a.samples().iter().all(|s| s.abs() <= 0.5 + 1e-12));
        assert_eq!(a.len(), 6400);
        let [f1, f2, f3] = spec.formants;
        assert!(f2 - f1 >= 300.0 && f3 - f2 >= 300.0);
    }

    #[test]
    fn corpus_is_reproducible() {
        let spec = CorpusSpec::four_participants(11);
        let norms = illustrative_norm_table();
        let a = generate_corpus(&spec, &norms).unwrap();
        assert_eq!(a, generate_corpus(&spec, &norms).unwrap());
        assert_eq!(a.len(), 160);
        let rhotic = a.iter().filter(|u| u.label == Label::Rhotic).count();
        assert!(rhotic > 30 && rhotic < 100);
    }

    #[test]
    fn rhotic_utterances_have_lower_f3_minus_f2_in_interval() {
        let spec = CorpusSpec::four_participants(5);
        let norms = illustrative_norm_table();
        let corpus = generate_corpus(&spec, &norms).unwrap();
        let mean_inside = |u: &SynthUtterance| {
            let p = spec.participants.iter().find(|p| p.id == u.participant_id).unwrap();
            let track = u.true_track(p);
            let series = normalize_formants(&track, &formant_transforms(&track).unwrap(), &norms).unwrap();
            let z = series.channel(3);
            let inside: Vec<f64> = (0..z.len())
                .filter(|&k| {
                    let t = k as f64 / FRAME_RATE_HZ;
                    t >= u.interval.start_s && t < u.interval.end_s
                })
                .map(|k| z[k])
                .collect();
            inside.iter().sum::<f64>() / inside.len() as f64
        };
        let group = |l: Label| {
            let v: Vec<f64> = corpus.iter().filter(|u| u.label == l).map(mean_inside).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let diff = group(Label::Derhotic) - group(Label::Rhotic);
        assert!((diff - 0.8).abs() < 0.2, "shift {diff}");
    }

    #[test]
    fn norm_table_covers_corpus_ages() {
        let norms = illustrative_norm_table();
        for p in CorpusSpec::four_participants(0).participants {
            assert!(norms.lookup(p.age, p.sex).is_ok());
        }
    }
}

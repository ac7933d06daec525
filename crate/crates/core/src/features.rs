//! Multi-channel frame series and the tract-variable feature contract.
//!
//! Tract variables (TVs) come from an external speech-inversion system and
//! enter through [`tv_series_from_rows`], which enforces the documented
//! ranges and timing. [`pseudo_invert`] is a deterministic affine stand-in
//! for that system, used to build test corpora.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::AudioBuffer;
use crate::FRAME_RATE_HZ;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("channel count mismatch: expected {expected}, got {actual}")]
    ChannelCount { expected: usize, actual: usize },
    #[error("channel {channel} has {actual} frames, expected {expected}")]
    RaggedChannels { channel: usize, expected: usize, actual: usize },
    #[error("need at least {needed} frames, got {actual}")]
    TooFewFrames { needed: usize, actual: usize },
    #[error("TV out of range: {channel} = {value} at row {row}")]
    TvOutOfRange { channel: &'static str, value: f64, row: usize },
    #[error("source feature out of range: {channel} = {value} at row {row}")]
    SourceOutOfRange { channel: &'static str, value: f64, row: usize },
    #[error("non-finite value in {channel} at row {row}")]
    NonFinite { channel: String, row: usize },
    #[error("non-uniform timestamps: row {row} is {gap} s after the previous row (expected 0.01 s)")]
    NonUniformTime { row: usize, gap: f64 },
    #[error("unknown feature set '{0}'")]
    UnknownFeatureSet(String),
}

/// Named channel layouts used as classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Age-and-sex normalized F1–F3, F3−F2 and its delta.
    #[serde(rename = "FORMANTS5")]
    Formants5,
    /// The six tract variables.
    #[serde(rename = "TV6")]
    Tv6,
    /// Six tract variables plus aperiodicity, periodicity and pitch.
    #[serde(rename = "TV9")]
    Tv9,
    /// FORMANTS5 followed by TV9.
    #[serde(rename = "FUSED14")]
    Fused14,
}

pub const TV_CHANNELS: [&str; 6] = ["la", "lp", "ttcl", "ttcd", "tbcl", "tbcd"];
pub const SOURCE_CHANNELS: [&str; 3] = ["aperiodicity", "periodicity", "pitch"];
pub const FORMANT_CHANNELS: [&str; 5] = ["z_f1", "z_f2", "z_f3", "z_f3_minus_f2", "delta_z_f3_minus_f2"];

/// Tolerance on the raw [-1, 1] TV range.
pub const TV_RANGE_TOLERANCE: f64 = 1e-6;
/// Tolerance on the 10 ms row spacing of TV files, seconds.
pub const TIME_STEP_TOLERANCE: f64 = 1e-4;

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [FeatureSet::Formants5, FeatureSet::Tv6, FeatureSet::Tv9, FeatureSet::Fused14];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Formants5 => "FORMANTS5",
            FeatureSet::Tv6 => "TV6",
            FeatureSet::Tv9 => "TV9",
            FeatureSet::Fused14 => "FUSED14",
        }
    }

    pub fn channel_names(self) -> Vec<&'static str> {
        match self {
            FeatureSet::Formants5 => FORMANT_CHANNELS.to_vec(),
            FeatureSet::Tv6 => TV_CHANNELS.to_vec(),
            FeatureSet::Tv9 => TV_CHANNELS.iter().chain(&SOURCE_CHANNELS).copied().collect(),
            FeatureSet::Fused14 => FORMANT_CHANNELS
                .iter()
                .chain(&TV_CHANNELS)
                .chain(&SOURCE_CHANNELS)
                .copied()
                .collect(),
        }
    }

    pub fn n_channels(self) -> usize {
        match self {
            FeatureSet::Formants5 => 5,
            FeatureSet::Tv6 => 6,
            FeatureSet::Tv9 => 9,
            FeatureSet::Fused14 => 14,
        }
    }

    pub fn needs_formants(self) -> bool {
        matches!(self, FeatureSet::Formants5 | FeatureSet::Fused14)
    }

    pub fn needs_tvs(self) -> bool {
        !matches!(self, FeatureSet::Formants5)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FeatureError::UnknownFeatureSet(s.to_string()))
    }
}

/// Equal-length named channels sampled at a fixed frame rate. Frame `k` is
/// centred at `start_time + k / frame_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    names: Vec<String>,
    channels: Vec<Vec<f64>>,
    frame_rate: f64,
    start_time: f64,
    feature_set: Option<FeatureSet>,
}

impl FrameSeries {
    pub fn new(
        names: Vec<String>,
        channels: Vec<Vec<f64>>,
        frame_rate: f64,
        start_time: f64,
    ) -> Result<Self, FeatureError> {
        if names.len() != channels.len() {
            return Err(FeatureError::ChannelCount {
                expected: names.len(),
                actual: channels.len(),
            });
        }
        let len = channels.first().map_or(0, Vec::len);
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(FeatureError::RaggedChannels {
                    channel: i,
                    expected: len,
                    actual: ch.len(),
                });
            }
        }
        Ok(Self {
            names,
            channels,
            frame_rate,
            start_time,
            feature_set: None,
        })
    }

    pub fn with_feature_set(
        set: FeatureSet,
        channels: Vec<Vec<f64>>,
        frame_rate: f64,
        start_time: f64,
    ) -> Result<Self, FeatureError> {
        if channels.len() != set.n_channels() {
            return Err(FeatureError::ChannelCount {
                expected: set.n_channels(),
                actual: channels.len(),
            });
        }
        let names = set.channel_names().into_iter().map(String::from).collect();
        let mut series = Self::new(names, channels, frame_rate, start_time)?;
        series.feature_set = Some(set);
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.channels[i].as_slice())
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn feature_set(&self) -> Option<FeatureSet> {
        self.feature_set
    }

    pub fn time(&self, frame: usize) -> f64 {
        self.start_time + frame as f64 / self.frame_rate
    }

    /// Values of every channel at one frame.
    pub fn frame(&self, k: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c[k]).collect()
    }

    /// Same data, every frame time shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            start_time: self.start_time + dt,
            ..self.clone()
        }
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            channels: self.channels.iter().map(|c| c[..len.min(c.len())].to_vec()).collect(),
            ..self.clone()
        }
    }

    fn map_channels(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self {
            channels: self.channels.iter().map(|c| f(c)).collect(),
            ..self.clone()
        }
    }

    /// Concatenates channels of two series (truncating to the shorter) and
    /// tags the result with `set`.
    pub fn concat(&self, other: &FrameSeries, set: FeatureSet) -> Result<Self, FeatureError> {
        let len = self.len().min(other.len());
        let channels: Vec<Vec<f64>> = self
            .channels
            .iter()
            .chain(&other.channels)
            .map(|c| c[..len].to_vec())
            .collect();
        Self::with_feature_set(set, channels, self.frame_rate, self.start_time)
    }
}

/// Builds a TV6 or TV9 series from decoded file rows.
///
/// `rows[i]` holds the value columns after `time_s`, in
/// `la, lp, ttcl, ttcd, tbcl, tbcd[, aperiodicity, periodicity, pitch]` order.
pub fn tv_series_from_rows(times: &[f64], rows: &[Vec<f64>]) -> Result<FrameSeries, FeatureError> {
    let width = rows.first().map_or(6, Vec::len);
    let set = match width {
        6 => FeatureSet::Tv6,
        9 => FeatureSet::Tv9,
        other => return Err(FeatureError::ChannelCount { expected: 6, actual: other }),
    };
    let names = set.channel_names();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(FeatureError::ChannelCount {
                expected: width,
                actual: row.len(),
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(FeatureError::NonFinite {
                    channel: names[c].to_string(),
                    row: r,
                });
            }
            if c < 6 && v.abs() > 1.0 + TV_RANGE_TOLERANCE {
                return Err(FeatureError::TvOutOfRange {
                    channel: TV_CHANNELS[c],
                    value: v,
                    row: r,
                });
            }
        }
        if width == 9 {
            let (ap, per, pitch) = (row[6], row[7], row[8]);
            if !(0.0..=1.0).contains(&ap) {
                return Err(FeatureError::SourceOutOfRange { channel: "aperiodicity", value: ap, row: r });
            }
            if !(0.0..=1.0).contains(&per) {
                return Err(FeatureError::SourceOutOfRange { channel: "periodicity", value: per, row: r });
            }
            if pitch < 0.0 {
                return Err(FeatureError::SourceOutOfRange { channel: "pitch", value: pitch, row: r });
            }
        }
    }
    if times.len() != rows.len() {
        return Err(FeatureError::TooFewFrames {
            needed: rows.len(),
            actual: times.len(),
        });
    }
    let step = 1.0 / FRAME_RATE_HZ;
    for (r, pair) in times.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        if !gap.is_finite() || (gap - step).abs() > TIME_STEP_TOLERANCE {
            return Err(FeatureError::NonUniformTime { row: r + 1, gap });
        }
    }
    let channels = (0..width).map(|c| rows.iter().map(|row| row[c]).collect()).collect();
    FrameSeries::with_feature_set(set, channels, FRAME_RATE_HZ, times.first().copied().unwrap_or(0.0))
}

/// Channels with a population SD below this are treated as constant.
pub const DEGENERATE_SD: f64 = 1e-8;

/// Per-channel standardization over the utterance, `(x − mean) / sd` with
/// the population SD. Constant channels become all zeros.
pub fn znorm_utterance(series: &FrameSeries) -> Result<FrameSeries, FeatureError> {
    if series.len() < 2 {
        return Err(FeatureError::TooFewFrames {
            needed: 2,
            actual: series.len(),
        });
    }
    Ok(series.map_channels(|c| {
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        if sd < DEGENERATE_SD {
            vec![0.0; c.len()]
        } else {
            c.iter().map(|x| (x - mean) / sd).collect()
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub window_s: f64,
    pub min_pitch_hz: f64,
    pub max_pitch_hz: f64,
    /// Periodicity above which a frame is voiced and receives a pitch.
    pub voicing_threshold: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            window_s: 0.040,
            min_pitch_hz: 60.0,
            max_pitch_hz: 400.0,
            voicing_threshold: 0.4,
        }
    }
}

/// Aperiodicity, periodicity and pitch per 10 ms frame from the normalized
/// autocorrelation peak in the pitch lag band.
///
/// This is a simple stand-in for the source features that normally
/// accompany the inverted TVs.
pub fn estimate_source_features(buf: &AudioBuffer, config: &SourceConfig) -> FrameSeries {
    let fs = buf.sample_rate() as f64;
    let x = buf.samples();
    let hop = libm::round(fs / FRAME_RATE_HZ).max(1.0) as usize;
    let window = libm::round(config.window_s * fs).max(2.0) as usize;
    let min_lag = libm::floor(fs / config.max_pitch_hz).max(1.0) as usize;
    let max_lag = libm::ceil(fs / config.min_pitch_hz) as usize;
    let n_frames = x.len() / hop;

    let mut ap = Vec::with_capacity(n_frames);
    let mut per = Vec::with_capacity(n_frames);
    let mut pitch = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let start = k * hop;
        let (p, f0) = autocorrelation_peak(x, start, window, min_lag, max_lag, fs);
        let p = p.clamp(0.0, 1.0);
        per.push(p);
        ap.push(1.0 - p);
        pitch.push(if p > config.voicing_threshold { f0 } else { 0.0 });
    }
    FrameSeries::new(
        SOURCE_CHANNELS.iter().map(|s| String::from(*s)).collect(),
        vec![ap, per, pitch],
        FRAME_RATE_HZ,
        0.0,
    )
    .expect("three equal-length channels")
}

// Normalized cross-correlation between x[s..s+w] and x[s+τ..s+τ+w] maximized
// over τ; returns (peak value, fs / refined lag).
fn autocorrelation_peak(x: &[f64], start: usize, window: usize, min_lag: usize, max_lag: usize, fs: f64) -> (f64, f64) {
    let mut scores = Vec::with_capacity(max_lag + 2);
    for lag in 0..=max_lag + 1 {
        if lag < min_lag.saturating_sub(1) || start + lag + window > x.len() {
            scores.push(f64::NEG_INFINITY);
            continue;
        }
        let a = &x[start..start + window];
        let b = &x[start + lag..start + lag + window];
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (u, v) in a.iter().zip(b) {
            ab += u * v;
            aa += u * u;
            bb += v * v;
        }
        let denom = libm::sqrt(aa * bb);
        scores.push(if denom > 1e-20 { ab / denom } else { 0.0 });
    }
    let mut best = (0.0, 0.0);
    for lag in min_lag..=max_lag {
        let s = scores[lag];
        // later (octave) peaks must beat earlier ones clearly
        if s > best.0 + 1e-3 && s >= scores[lag - 1] && s >= scores[lag + 1] {
            // parabolic refinement of the lag
            let (l, r) = (scores[lag - 1], scores[lag + 1]);
            let mut offset = 0.0;
            if l.is_finite() && r.is_finite() {
                let curv = l - 2.0 * s + r;
                if curv < 0.0 {
                    offset = (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
                }
            }
            best = (s, fs / (lag as f64 + offset));
        }
    }
    best
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Frame-local affine map from FORMANTS5 to raw (un-normalized) TV6.
pub fn pseudo_invert(formants: &FrameSeries) -> Result<FrameSeries, FeatureError> {
    if formants.n_channels() != 5 {
        return Err(FeatureError::ChannelCount {
            expected: 5,
            actual: formants.n_channels(),
        });
    }
    let (z1, z2, z3, zd) = (formants.channel(0), formants.channel(1), formants.channel(2), formants.channel(3));
    let map = |f: &dyn Fn(usize) -> f64| (0..formants.len()).map(|k| clamp_unit(f(k))).collect::<Vec<_>>();
    let la = map(&|k| 0.1 * z1[k]);
    let lp = map(&|k| -0.1 * z1[k]);
    let ttcl = map(&|k| 0.2 * zd[k]);
    let ttcd = map(&|k| -0.2 * z3[k]);
    let tbcl = map(&|k| -0.4 * z2[k]);
    let tbcd = map(&|k| 0.3 * z3[k]);
    FrameSeries::with_feature_set(
        FeatureSet::Tv6,
        vec![la, lp, ttcl, ttcd, tbcl, tbcd],
        formants.frame_rate(),
        formants.start_time(),
    )
}

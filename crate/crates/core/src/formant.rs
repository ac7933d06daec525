//! Formant estimation by linear prediction, F3−F2 transforms, and
//! age-and-sex normalization against a reference norm table.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSet, FrameSeries};
use crate::signal::{self, AudioBuffer, SignalError};
use crate::FRAME_RATE_HZ;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormantError {
    #[error("LPC order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("LPC order {order} requires more than {len} samples")]
    OrderTooLarge { order: usize, len: usize },
    #[error("degenerate frame (zero energy)")]
    DegenerateFrame,
    #[error("root finder did not converge within {0} iterations")]
    RootsNotConverged(usize),
    #[error("empty formant track")]
    EmptyTrack,
    #[error("invalid participant profile: {0}")]
    InvalidProfile(&'static str),
    #[error("invalid norm table: {0}")]
    InvalidNormTable(String),
    #[error("no norm row within {max_distance} years of age {age} ({sex})")]
    NoNormRow { age: f64, sex: Sex, max_distance: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Some(Sex::Female),
            "m" | "male" => Some(Sex::Male),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A speaker and the formant ceiling used to analyse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    pub formant_ceiling_hz: f64,
}

impl ParticipantProfile {
    pub fn new(id: impl Into<String>, age: f64, sex: Sex, formant_ceiling_hz: f64) -> Result<Self, FormantError> {
        if !(age > 0.0) || !age.is_finite() {
            return Err(FormantError::InvalidProfile("age must be positive"));
        }
        if !(3000.0..=8000.0).contains(&formant_ceiling_hz) {
            return Err(FormantError::InvalidProfile("formant ceiling must lie in [3000, 8000] Hz"));
        }
        Ok(Self {
            id: id.into(),
            age,
            sex,
            formant_ceiling_hz,
        })
    }

    /// Sample rate the audio is resampled to before LPC (twice the ceiling).
    pub fn analysis_rate(&self) -> u32 {
        libm::round(2.0 * self.formant_ceiling_hz) as u32
    }
}

/// Burg's method: predictor coefficients `a[1..=order]` such that
/// `x[n] ≈ Σ a[i]·x[n−i]`.
///
/// Every reflection coefficient has magnitude below one, so the all-pole
/// filter `1 / (1 − Σ a[i] z^−i)` is minimum phase. If the residual energy
/// vanishes before `order` stages (a perfectly predictable frame) the
/// remaining coefficients are zero.
pub fn lpc_burg(frame: &[f64], order: usize) -> Result<Vec<f64>, FormantError> {
    if order < 2 {
        return Err(FormantError::OrderTooSmall(order));
    }
    if frame.len() <= order {
        return Err(FormantError::OrderTooLarge { order, len: frame.len() });
    }
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if !(energy > f64::MIN_POSITIVE) {
        return Err(FormantError::DegenerateFrame);
    }

    let n = frame.len();
    let mut forward = frame.to_vec();
    let mut backward = frame.to_vec();
    // error-filter coefficients, A(z) = 1 + Σ c[i] z^−i
    let mut c = vec![0.0; order + 1];
    c[0] = 1.0;
    let mut scratch = vec![0.0; order + 1];

    for m in 0..order {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in (m + 1)..n {
            num += forward[i] * backward[i - 1];
            den += forward[i] * forward[i] + backward[i - 1] * backward[i - 1];
        }
        if !(den > energy * 1e-30) {
            break;
        }
        let k = -2.0 * num / den;

        scratch[..=m + 1].copy_from_slice(&c[..=m + 1]);
        for i in 1..=m + 1 {
            c[i] = scratch[i] + k * scratch[m + 1 - i];
        }

        for i in ((m + 1)..n).rev() {
            let f = forward[i];
            let b = backward[i - 1];
            forward[i] = f + k * b;
            backward[i] = b + k * f;
        }
    }
    Ok(c[1..].iter().map(|v| -v).collect())
}

/// A resonance of the LPC model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub frequency: f64,
    pub bandwidth: f64,
}

const ROOT_MAX_ITER: usize = 500;

/// Converts predictor coefficients to resonance candidates, ascending in
/// frequency. Only complex poles with angle in (0, π) yield a candidate:
/// `frequency = θ·fs/2π`, `bandwidth = −(fs/π)·ln r`. Poles outside the unit
/// circle are reflected inside first.
pub fn lpc_to_formants(coeffs: &[f64], sample_rate: f64, max_formants: usize) -> Result<Vec<Resonance>, FormantError> {
    // z^p − a1 z^(p−1) − … − ap, highest power first
    let mut poly = Vec::with_capacity(coeffs.len() + 1);
    poly.push(1.0);
    poly.extend(coeffs.iter().map(|a| -a));
    let roots = polynomial_roots(&poly)?;

    let mut out: Vec<Resonance> = roots
        .iter()
        .filter(|z| z.im > 1e-10 * (1.0 + z.norm()))
        .map(|z| {
            let theta = libm::atan2(z.im, z.re);
            let mut r = z.norm();
            if r > 1.0 {
                r = 1.0 / r;
            }
            Resonance {
                frequency: theta * sample_rate / (2.0 * PI),
                bandwidth: -(sample_rate / PI) * libm::log(r),
            }
        })
        .collect();
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    out.truncate(max_formants);
    Ok(out)
}

fn eval_with_derivative(poly: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(poly[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in &poly[1..] {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a monic real polynomial (highest power first) by the
/// Aberth–Ehrlich simultaneous iteration, followed by Newton polishing.
fn polynomial_roots(poly: &[f64]) -> Result<Vec<Complex64>, FormantError> {
    let degree = poly.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    // Cauchy bound on root magnitude
    let bound = 1.0 + poly[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let radius = bound.min(1.5);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / degree as f64 + 0.4))
        .collect();

    let mut converged = false;
    for _ in 0..ROOT_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for k in 0..degree {
            let z = roots[k];
            let (p, dp) = eval_with_derivative(poly, z);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z - roots[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                continue;
            }
            roots[k] = z - step;
            max_step = max_step.max(step.norm() / (1.0 + z.norm()));
        }
        if max_step < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FormantError::RootsNotConverged(ROOT_MAX_ITER));
    }
    for z in &mut roots {
        for _ in 0..2 {
            let (p, dp) = eval_with_derivative(poly, *z);
            if dp.norm() > 0.0 {
                let next = *z - p / dp;
                if next.re.is_finite() && next.im.is_finite() {
                    *z = next;
                }
            }
        }
    }
    Ok(roots)
}

/// Tracker settings. The defaults mirror a five-formant LPC analysis with a
/// 50 Hz pre-emphasis, 25 ms windows and a 10 ms hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormantConfig {
    pub lpc_order: usize,
    pub preemphasis_hz: f64,
    pub window_s: f64,
    pub hop_s: f64,
    pub min_frequency_hz: f64,
    /// Candidates must lie below `ceiling − ceiling_margin_hz`.
    pub ceiling_margin_hz: f64,
    pub max_bandwidth_hz: f64,
    /// Interior runs of absent frames up to this length are interpolated.
    pub max_gap_frames: usize,
}

impl Default for FormantConfig {
    fn default() -> Self {
        Self {
            lpc_order: 10,
            preemphasis_hz: 50.0,
            window_s: 0.025,
            hop_s: 0.010,
            min_frequency_hz: 90.0,
            ceiling_margin_hz: 50.0,
            max_bandwidth_hz: 700.0,
            max_gap_frames: 3,
        }
    }
}

/// F1–F3 at one analysis frame; `None` when fewer than three candidates
/// survived filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormantFrame {
    pub time: f64,
    pub formants: Option<[Resonance; 3]>,
}

impl FormantFrame {
    pub fn absent(time: f64) -> Self {
        Self { time, formants: None }
    }

    pub fn is_present(&self) -> bool {
        self.formants.is_some()
    }

    pub fn f1(&self) -> Option<f64> {
        self.formants.map(|f| f[0].frequency)
    }

    pub fn f2(&self) -> Option<f64> {
        self.formants.map(|f| f[1].frequency)
    }

    pub fn f3(&self) -> Option<f64> {
        self.formants.map(|f| f[2].frequency)
    }
}

/// Formant frames at a 10 ms spacing for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FormantTrack {
    pub frames: Vec<FormantFrame>,
    pub participant: ParticipantProfile,
}

impl FormantTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn present_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_present()).count()
    }

    /// Median of the present values of formant `index` (0 = F1).
    pub fn median(&self, index: usize) -> Option<f64> {
        let mut values: Vec<f64> = self
            .frames
            .iter()
            .filter_map(|f| f.formants.map(|r| r[index].frequency))
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let mid = values.len() / 2;
        Some(if values.len() % 2 == 0 {
            0.5 * (values[mid - 1] + values[mid])
        } else {
            values[mid]
        })
    }
}

/// Tracks F1–F3 through an utterance using the participant's ceiling.
pub fn track_formants(
    buf: &AudioBuffer,
    profile: &ParticipantProfile,
    config: &FormantConfig,
) -> Result<FormantTrack, FormantError> {
    let ceiling = profile.formant_ceiling_hz;
    let rate = profile.analysis_rate();
    let resampled = signal::resample(buf, rate)?;
    let emphasized = signal::preemphasize(&resampled, config.preemphasis_hz)?;
    let frames = signal::frame_signal(&emphasized, config.window_s, config.hop_s)?;

    let roof = ceiling - config.ceiling_margin_hz;
    let mut out: Vec<FormantFrame> = (0..frames.len())
        .map(|i| {
            let time = frames.center_time(i);
            let Ok(coeffs) = lpc_burg(&frames.frames[i], config.lpc_order) else {
                return FormantFrame::absent(time);
            };
            let Ok(candidates) = lpc_to_formants(&coeffs, rate as f64, config.lpc_order / 2) else {
                return FormantFrame::absent(time);
            };
            let kept: Vec<Resonance> = candidates
                .into_iter()
                .filter(|r| {
                    r.frequency >= config.min_frequency_hz
                        && r.frequency <= roof
                        && r.bandwidth < config.max_bandwidth_hz
                })
                .collect();
            let formants = match kept.as_slice() {
                [a, b, c, ..] if a.frequency < b.frequency && b.frequency < c.frequency => Some([*a, *b, *c]),
                _ => None,
            };
            FormantFrame { time, formants }
        })
        .collect();
    interpolate_gaps(&mut out, config.max_gap_frames);
    Ok(FormantTrack {
        frames: out,
        participant: profile.clone(),
    })
}

fn interpolate_gaps(frames: &mut [FormantFrame], max_gap: usize) {
    let mut i = 0;
    while i < frames.len() {
        if frames[i].is_present() {
            i += 1;
            continue;
        }
        let start = i;
        while i < frames.len() && !frames[i].is_present() {
            i += 1;
        }
        let (Some(before), true) = (start.checked_sub(1), i < frames.len()) else {
            continue;
        };
        if i - start > max_gap {
            continue;
        }
        let (Some(left), Some(right)) = (frames[before].formants, frames[i].formants) else {
            continue;
        };
        let span = (i - before) as f64;
        for (k, frame) in frames[start..i].iter_mut().enumerate() {
            let w = (k + 1) as f64 / span;
            let mut mixed = left;
            for (m, r) in mixed.iter_mut().enumerate() {
                r.frequency = left[m].frequency + w * (right[m].frequency - left[m].frequency);
                r.bandwidth = left[m].bandwidth + w * (right[m].bandwidth - left[m].bandwidth);
            }
            frame.formants = Some(mixed);
        }
    }
}

/// F3−F2 distance and its frame-to-frame change.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformTrack {
    pub f3_minus_f2: Vec<Option<f64>>,
    pub delta_f3_minus_f2: Vec<Option<f64>>,
}

/// Central difference `(x[t+1] − x[t−1]) / 2`.
///
/// A neighbour that is off the end of the sequence or absent is replaced by
/// `x[t]` (edge replication); an absent `x[t]` stays absent.
pub fn central_delta(values: &[Option<f64>]) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|t| {
            let here = values[t]?;
            let prev = t.checked_sub(1).and_then(|p| values[p]).unwrap_or(here);
            let next = values.get(t + 1).copied().flatten().unwrap_or(here);
            Some((next - prev) / 2.0)
        })
        .collect()
}

pub fn formant_transforms(track: &FormantTrack) -> Result<TransformTrack, FormantError> {
    if track.is_empty() {
        return Err(FormantError::EmptyTrack);
    }
    let distance: Vec<Option<f64>> = track
        .frames
        .iter()
        .map(|f| Some(f.f3()? - f.f2()?))
        .collect();
    let delta = central_delta(&distance);
    Ok(TransformTrack {
        f3_minus_f2: distance,
        delta_f3_minus_f2: delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStat {
    pub mean: f64,
    pub sd: f64,
}

impl NormStat {
    pub fn z(&self, value: f64) -> f64 {
        (value - self.mean) / self.sd
    }
}

/// Reference formant statistics for one (age, sex) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub age: u32,
    pub sex: Sex,
    pub f1: NormStat,
    pub f2: NormStat,
    pub f3: NormStat,
}

impl NormRow {
    /// Statistics of F3−F2 implied by the row, treating F2 and F3 as
    /// independent.
    pub fn f3_minus_f2(&self) -> NormStat {
        NormStat {
            mean: self.f3.mean - self.f2.mean,
            sd: libm::sqrt(self.f3.sd * self.f3.sd + self.f2.sd * self.f2.sd),
        }
    }
}

/// Maximum distance in years between a participant's age and the norm row
/// used for them.
pub const MAX_NORM_AGE_DISTANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    rows: Vec<NormRow>,
}

impl NormTable {
    pub fn new(mut rows: Vec<NormRow>) -> Result<Self, FormantError> {
        if rows.is_empty() {
            return Err(FormantError::InvalidNormTable("no rows".into()));
        }
        for row in &rows {
            for stat in [row.f1, row.f2, row.f3] {
                if !(stat.sd > 0.0) || !stat.mean.is_finite() || !stat.sd.is_finite() {
                    return Err(FormantError::InvalidNormTable(alloc::format!(
                        "row (age {}, {}) needs finite means and positive SDs",
                        row.age, row.sex
                    )));
                }
            }
        }
        rows.sort_by_key(|r| (r.sex, r.age));
        for pair in rows.windows(2) {
            if pair[0].sex == pair[1].sex {
                if pair[0].age == pair[1].age {
                    return Err(FormantError::InvalidNormTable(alloc::format!(
                        "duplicate row (age {}, {})",
                        pair[0].age, pair[0].sex
                    )));
                }
                if pair[1].age != pair[0].age + 1 {
                    return Err(FormantError::InvalidNormTable(alloc::format!(
                        "ages for {} are not contiguous ({} then {})",
                        pair[0].sex, pair[0].age, pair[1].age
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[NormRow] {
        &self.rows
    }

    /// Row with the integer age nearest to `age` for `sex` (ties go to the
    /// younger row), provided it lies within [`MAX_NORM_AGE_DISTANCE`].
    pub fn lookup(&self, age: f64, sex: Sex) -> Result<&NormRow, FormantError> {
        self.rows
            .iter()
            .filter(|r| r.sex == sex)
            .map(|r| (libm::fabs(r.age as f64 - age), r))
            .filter(|(d, _)| *d <= MAX_NORM_AGE_DISTANCE)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| r)
            .ok_or(FormantError::NoNormRow {
                age,
                sex,
                max_distance: MAX_NORM_AGE_DISTANCE,
            })
    }
}

/// Age-and-sex normalized formant features `[zF1, zF2, zF3, z(F3−F2),
/// Δz(F3−F2)]`.
///
/// The distance is normalized first and then differenced. Absent frames are
/// excluded from every computation and written as zero.
pub fn normalize_formants(
    track: &FormantTrack,
    transforms: &TransformTrack,
    norms: &NormTable,
) -> Result<FrameSeries, FormantError> {
    if track.is_empty() {
        return Err(FormantError::EmptyTrack);
    }
    let profile = &track.participant;
    let row = norms.lookup(profile.age, profile.sex)?;
    let distance_stat = row.f3_minus_f2();

    let z_of = |values: &mut dyn Iterator<Item = Option<f64>>, stat: NormStat| -> Vec<Option<f64>> {
        values.map(|v| v.map(|x| stat.z(x))).collect()
    };
    let z1 = z_of(&mut track.frames.iter().map(|f| f.f1()), row.f1);
    let z2 = z_of(&mut track.frames.iter().map(|f| f.f2()), row.f2);
    let z3 = z_of(&mut track.frames.iter().map(|f| f.f3()), row.f3);
    let zd = z_of(&mut transforms.f3_minus_f2.iter().copied(), distance_stat);
    let dzd = central_delta(&zd);

    let fill = |v: Vec<Option<f64>>| v.into_iter().map(|x| x.unwrap_or(0.0)).collect::<Vec<_>>();
    let start_time = track.frames.first().map(|f| f.time).unwrap_or(0.0);
    let series = FrameSeries::with_feature_set(
        FeatureSet::Formants5,
        vec![fill(z1), fill(z2), fill(z3), fill(zd), fill(dzd)],
        FRAME_RATE_HZ,
        start_time,
    )
    .expect("channels built from one track have equal length");
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize_vowel, VowelSpec};
    use alloc::vec;

    extern crate std;

    // AR(2) with poles at r = 0.95, θ = ±0.2π driven by seeded white noise.
    fn ar2_signal(n: usize) -> Vec<f64> {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(11);
        let (a1, a2) = (1.5371, -0.9025);
        let mut x = vec![0.0; n];
        for i in 0..n {
            let e: f64 = rng.random::<f64>() - 0.5;
            let p1 = if i >= 1 { x[i - 1] } else { 0.0 };
            let p2 = if i >= 2 { x[i - 2] } else { 0.0 };
            x[i] = a1 * p1 + a2 * p2 + e;
        }
        x
    }

    #[test]
    fn burg_recovers_ar2() {
        let x = ar2_signal(8000);
        let a = lpc_burg(&x, 2).unwrap();
        assert!((a[0] - 1.5371).abs() < 0.02, "{a:?}");
        assert!((a[1] + 0.9025).abs() < 0.02, "{a:?}");
    }

    #[test]
    fn burg_white_noise_is_flat() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        let x: Vec<f64> = (0..20000).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = lpc_burg(&x, 2).unwrap();
        assert!(a.iter().all(|c| c.abs() < 0.1), "{a:?}");
    }

    #[test]
    fn burg_rejects_bad_input() {
        assert_eq!(lpc_burg(&[0.0; 64], 10), Err(FormantError::DegenerateFrame));
        assert!(matches!(lpc_burg(&[1.0; 10], 10), Err(FormantError::OrderTooLarge { .. })));
        assert_eq!(lpc_burg(&[1.0; 10], 1), Err(FormantError::OrderTooSmall(1)));
    }

    #[test]
    fn burg_filter_is_minimum_phase() {
        let x = ar2_signal(400);
        let a = lpc_burg(&x, 10).unwrap();
        let mut poly = vec![1.0];
        poly.extend(a.iter().map(|v| -v));
        let roots = polynomial_roots(&poly).unwrap();
        assert!(roots.iter().all(|z| z.norm() < 1.0));
    }

    #[test]
    fn single_pole_pair_to_formant() {
        let (r, theta) = (0.95f64, 0.2 * PI);
        let coeffs = [2.0 * r * libm::cos(theta), -r * r];
        let out = lpc_to_formants(&coeffs, 10000.0, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].frequency - 1000.0).abs() < 1e-6);
        let expected_bw = -(10000.0 / PI) * libm::log(0.95);
        assert!((out[0].bandwidth - expected_bw).abs() < 1e-6);
        assert!((out[0].bandwidth - 163.3).abs() < 0.05);
    }

    #[test]
    fn real_roots_give_no_candidates() {
        // (z − 0.5)(z + 0.3) = z² − 0.2z − 0.15
        let out = lpc_to_formants(&[0.2, 0.15], 10000.0, 5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn two_pole_pairs_sorted() {
        // product of two conjugate pairs, higher one first in construction
        let pair = |r: f64, t: f64| [1.0, -2.0 * r * libm::cos(t), r * r];
        let p = pair(0.9, 0.3 * PI);
        let q = pair(0.9, 0.1 * PI);
        let mut prod = [0.0; 5];
        for i in 0..3 {
            for j in 0..3 {
                prod[i + j] += p[i] * q[j];
            }
        }
        let coeffs: Vec<f64> = prod[1..].iter().map(|c| -c).collect();
        let out = lpc_to_formants(&coeffs, 10000.0, 5).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].frequency - 500.0).abs() < 1e-6);
        assert!((out[1].frequency - 1500.0).abs() < 1e-6);
    }

    fn profile(ceiling: f64) -> ParticipantProfile {
        ParticipantProfile::new("p", 12.0, Sex::Female, ceiling).unwrap()
    }

    #[test]
    fn analysis_rate_is_twice_ceiling() {
        assert_eq!(profile(6000.0).analysis_rate(), 12000);
    }

    #[test]
    fn profile_validation() {
        assert!(ParticipantProfile::new("x", 10.0, Sex::Male, 2500.0).is_err());
        assert!(ParticipantProfile::new("x", 0.0, Sex::Male, 5000.0).is_err());
    }

    #[test]
    fn tracks_synthetic_vowel() {
        let spec = VowelSpec {
            formants: [800.0, 1200.0, 2500.0],
            bandwidths: [80.0, 90.0, 120.0],
            f0: 120.0,
            sample_rate: 16000,
            duration_s: 0.5,
        };
        let audio = synthesize_vowel(&spec);
        let track = track_formants(&audio, &profile(5000.0), &FormantConfig::default()).unwrap();
        for (i, target) in spec.formants.iter().enumerate() {
            let median = track.median(i).unwrap();
            assert!((median - target).abs() / target < 0.05, "F{} median {median} vs {target}", i + 1);
        }
        for frame in &track.frames {
            if let Some([a, b, c]) = frame.formants {
                assert!(a.frequency < b.frequency && b.frequency < c.frequency);
                assert!(c.frequency < 5000.0);
            }
        }
    }

    #[test]
    fn gain_does_not_move_formants() {
        let spec = VowelSpec {
            formants: [600.0, 1700.0, 2600.0],
            bandwidths: [70.0, 100.0, 150.0],
            f0: 150.0,
            sample_rate: 16000,
            duration_s: 0.3,
        };
        let audio = synthesize_vowel(&spec);
        let cfg = FormantConfig::default();
        let full = track_formants(&audio, &profile(5000.0), &cfg).unwrap();
        let half = track_formants(&audio.scaled(0.5), &profile(5000.0), &cfg).unwrap();
        assert_eq!(full.len(), half.len());
        for (a, b) in full.frames.iter().zip(&half.frames) {
            assert_eq!(a.is_present(), b.is_present());
            for i in 0..3 {
                if let (Some(x), Some(y)) = (a.formants, b.formants) {
                    assert!((x[i].frequency - y[i].frequency).abs() < 1.0);
                }
            }
        }
    }

    #[test]
    fn silence_is_all_absent() {
        let audio = AudioBuffer::new(vec![0.0; 8000], 16000).unwrap();
        let track = track_formants(&audio, &profile(5000.0), &FormantConfig::default()).unwrap();
        assert!(!track.is_empty());
        assert_eq!(track.present_count(), 0);
    }

    fn frame(f2: f64, f3: f64) -> FormantFrame {
        let r = |f| Resonance { frequency: f, bandwidth: 100.0 };
        FormantFrame {
            time: 0.0,
            formants: Some([r(500.0), r(f2), r(f3)]),
        }
    }

    #[test]
    fn gap_interpolation_rules() {
        let mut frames = vec![frame(1000.0, 2000.0)];
        frames.extend([FormantFrame::absent(0.0); 3]);
        frames.push(frame(1400.0, 2400.0));
        frames.extend([FormantFrame::absent(0.0); 4]);
        frames.push(frame(1400.0, 2400.0));
        frames.push(FormantFrame::absent(0.0));
        interpolate_gaps(&mut frames, 3);
        assert_eq!(frames[2].f2(), Some(1200.0));
        assert!(frames[1..4].iter().all(|f| f.is_present()));
        assert!(frames[5..9].iter().all(|f| !f.is_present()));
        assert!(!frames[10].is_present());
    }

    #[test]
    fn transform_examples() {
        let track = FormantTrack {
            frames: vec![frame(1500.0, 2000.0)],
            participant: profile(5000.0),
        };
        assert_eq!(formant_transforms(&track).unwrap().f3_minus_f2, vec![Some(500.0)]);

        let d = central_delta(&[Some(100.0), Some(200.0), Some(400.0)]);
        assert_eq!(d, vec![Some(50.0), Some(150.0), Some(100.0)]);

        let flat = central_delta(&[Some(7.0); 5]);
        assert!(flat.iter().all(|v| *v == Some(0.0)));

        let gapped = central_delta(&[Some(1.0), None, Some(3.0)]);
        assert_eq!(gapped, vec![Some(0.0), None, Some(0.0)]);
    }

    #[test]
    fn empty_track_rejected() {
        let track = FormantTrack {
            frames: vec![],
            participant: profile(5000.0),
        };
        assert_eq!(formant_transforms(&track), Err(FormantError::EmptyTrack));
    }

    fn norm_row(age: u32, sex: Sex) -> NormRow {
        NormRow {
            age,
            sex,
            f1: NormStat { mean: 700.0, sd: 100.0 },
            f2: NormStat { mean: 1200.0, sd: 200.0 },
            f3: NormStat { mean: 2800.0, sd: 250.0 },
        }
    }

    #[test]
    fn nearest_age_lookup() {
        let table = NormTable::new((10..=18).map(|a| norm_row(a, Sex::Male)).collect()).unwrap();
        assert_eq!(table.lookup(15.7, Sex::Male).unwrap().age, 16);
        assert_eq!(table.lookup(15.5, Sex::Male).unwrap().age, 15);
        assert_eq!(table.lookup(19.9, Sex::Male).unwrap().age, 18);
        assert!(table.lookup(20.5, Sex::Male).is_err());
        assert!(table.lookup(12.0, Sex::Female).is_err());
    }

    #[test]
    fn norm_table_validation() {
        let mut bad = norm_row(10, Sex::Male);
        bad.f2.sd = 0.0;
        assert!(NormTable::new(vec![bad]).is_err());
        assert!(NormTable::new(vec![norm_row(10, Sex::Male), norm_row(12, Sex::Male)]).is_err());
        assert!(NormTable::new(vec![norm_row(10, Sex::Male), norm_row(10, Sex::Female)]).is_ok());
    }

    #[test]
    fn normalization_arithmetic() {
        let table = NormTable::new(vec![norm_row(12, Sex::Female)]).unwrap();
        let track = FormantTrack {
            frames: vec![frame(1400.0, 2800.0), FormantFrame::absent(0.01), frame(1200.0, 2800.0)],
            participant: profile(5000.0),
        };
        let transforms = formant_transforms(&track).unwrap();
        let series = normalize_formants(&track, &transforms, &table).unwrap();
        assert_eq!(series.n_channels(), 5);
        assert_eq!(series.channel(1)[0], 1.0);
        assert_eq!(series.channel(1)[2], 0.0);
        assert_eq!(series.channel(2)[0], 0.0);
        // absent frame zero-filled in every channel
        assert!((0..5).all(|c| series.channel(c)[1] == 0.0));
        let sd = libm::sqrt(250.0f64 * 250.0 + 200.0 * 200.0);
        assert!((series.channel(3)[0] - (1400.0 - 1600.0) / sd).abs() < 1e-12);
    }
}

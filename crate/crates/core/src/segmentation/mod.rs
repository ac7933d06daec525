//! Rhotic interval annotations and 10-bin trajectory averaging.

mod textgrid;

pub use textgrid::{
    parse_textgrid, serialize_textgrid, Interval, IntervalTier, ParseError, SkippedTier, TextGrid, TIME_EPSILON,
};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FrameSeries;

/// Number of bins used for trajectory plots and effect sizes.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("tier '{tier}' not found (available: {available})")]
    TierMissing { tier: String, available: String },
    #[error("tier '{0}' has no labeled interval")]
    NoLabeledInterval(String),
    #[error("ambiguous annotation: tier '{tier}' has {count} labeled intervals")]
    Ambiguous { tier: String, count: usize },
    #[error("interval [{start}, {end}] s lies outside the series range [{first}, {last}] s")]
    OutsideSeries { start: f64, end: f64, first: f64, last: f64 },
    #[error("interval [{start}, {end}] s contains no frames")]
    NoFrames { start: f64, end: f64 },
    #[error("invalid interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },
    #[error("bin count must be positive")]
    NoBins,
}

/// Time span of the target rhotic within an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoticInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl RhoticInterval {
    pub fn new(start_s: f64, end_s: f64, label: impl Into<String>) -> Result<Self, SegmentError> {
        if !(end_s > start_s) || !start_s.is_finite() || !end_s.is_finite() {
            return Err(SegmentError::InvalidInterval { start: start_s, end: end_s });
        }
        Ok(Self {
            start_s,
            end_s,
            label: label.into(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// The single labeled interval on `tier_name`; empty or whitespace labels
/// count as unlabeled.
pub fn extract_rhotic_interval(grid: &TextGrid, tier_name: &str) -> Result<RhoticInterval, SegmentError> {
    let tier = grid.tier(tier_name).ok_or_else(|| SegmentError::TierMissing {
        tier: tier_name.to_string(),
        available: grid.tiers.iter().map(|t| t.name.as_str()).collect::<Vec<_>>().join(", "),
    })?;
    let labeled: Vec<&Interval> = tier.intervals.iter().filter(|i| !i.text.trim().is_empty()).collect();
    match labeled.as_slice() {
        [] => Err(SegmentError::NoLabeledInterval(tier_name.to_string())),
        [one] => RhoticInterval::new(one.xmin, one.xmax, one.text.trim()),
        many => Err(SegmentError::Ambiguous {
            tier: tier_name.to_string(),
            count: many.len(),
        }),
    }
}

/// Per-bin channel means over an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSegment {
    /// `bins[k][c]`: mean of channel `c` in bin `k`.
    pub bins: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
    pub interval: RhoticInterval,
    /// Frames that fell in each bin before empty bins were filled.
    pub occupancy: Vec<usize>,
}

impl BinnedSegment {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Values of one channel across bins.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.bins.iter().map(|b| b[c]).collect()
    }
}

// Relative slack used when a frame time falls on a bin edge.
const EDGE_SLACK: f64 = 1e-9;

/// Bin index of every frame inside `interval` (frames outside are `None`).
///
/// Bin `k` covers `[start + k·L/n, start + (k+1)·L/n)` in continuous time and
/// a frame belongs to the bin containing its time stamp.
pub fn assign_bins(series: &FrameSeries, interval: &RhoticInterval, n_bins: usize) -> Vec<Option<usize>> {
    let len = interval.duration();
    (0..series.len())
        .map(|k| {
            let offset = (series.time(k) - interval.start_s) / len;
            let scaled = offset * n_bins as f64 + EDGE_SLACK;
            if scaled < 0.0 || scaled >= n_bins as f64 {
                None
            } else {
                Some(libm::floor(scaled) as usize)
            }
        })
        .collect()
}

/// Averages each channel of `series` into `n_bins` equal-duration bins
/// spanning `interval`. Empty bins copy the nearest non-empty bin (the
/// earlier one on ties).
pub fn bin_segment(series: &FrameSeries, interval: &RhoticInterval, n_bins: usize) -> Result<BinnedSegment, SegmentError> {
    if n_bins == 0 {
        return Err(SegmentError::NoBins);
    }
    if series.is_empty() {
        return Err(SegmentError::NoFrames {
            start: interval.start_s,
            end: interval.end_s,
        });
    }
    let first = series.time(0);
    let last = series.time(series.len() - 1) + 1.0 / series.frame_rate();
    if interval.start_s < first - TIME_EPSILON || interval.end_s > last + TIME_EPSILON {
        return Err(SegmentError::OutsideSeries {
            start: interval.start_s,
            end: interval.end_s,
            first,
            last,
        });
    }

    let c = series.n_channels();
    let mut sums = vec![vec![0.0; c]; n_bins];
    let mut occupancy = vec![0usize; n_bins];
    for (k, bin) in assign_bins(series, interval, n_bins).into_iter().enumerate() {
        let Some(b) = bin else { continue };
        occupancy[b] += 1;
        for (ch, sum) in sums[b].iter_mut().enumerate() {
            *sum += series.channel(ch)[k];
        }
    }
    if occupancy.iter().all(|&n| n == 0) {
        return Err(SegmentError::NoFrames {
            start: interval.start_s,
            end: interval.end_s,
        });
    }
    let means: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&occupancy)
        .map(|(s, &n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let bins = (0..n_bins)
        .map(|b| {
            if let Some(m) = &means[b] {
                return m.clone();
            }
            let nearest = (1..n_bins)
                .flat_map(|d| [b.checked_sub(d), Some(b + d)])
                .flatten()
                .find(|&i| i < n_bins && means[i].is_some())
                .expect("at least one bin is occupied");
            means[nearest].clone().expect("checked above")
        })
        .collect();
    Ok(BinnedSegment {
        bins,
        channel_names: series.names().to_vec(),
        interval: interval.clone(),
        occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FRAME_RATE_HZ;
    use alloc::format;
    use proptest::prelude::*;

    extern crate std;

    fn series(values: Vec<f64>, start: f64) -> FrameSeries {
        FrameSeries::new(vec!["x".into()], vec![values], FRAME_RATE_HZ, start).unwrap()
    }

    fn tier_grid(labels: &[(&str, f64, f64)]) -> TextGrid {
        TextGrid {
            xmin: 0.0,
            xmax: 1.0,
            tiers: vec![IntervalTier {
                name: "rhotic".into(),
                xmin: 0.0,
                xmax: 1.0,
                intervals: labels
                    .iter()
                    .map(|&(t, a, b)| Interval {
                        xmin: a,
                        xmax: b,
                        text: t.into(),
                    })
                    .collect(),
            }],
            skipped_tiers: vec![],
        }
    }

    #[test]
    fn extracts_unique_interval() {
        let grid = tier_grid(&[("", 0.0, 0.5), ("ɹ", 0.5, 0.72), ("", 0.72, 1.0)]);
        let iv = extract_rhotic_interval(&grid, "rhotic").unwrap();
        assert_eq!((iv.start_s, iv.end_s), (0.5, 0.72));
        assert_eq!(iv.label, "ɹ");
    }

    #[test]
    fn ambiguous_and_missing() {
        let grid = tier_grid(&[("r", 0.0, 0.5), ("r", 0.5, 1.0)]);
        let err = extract_rhotic_interval(&grid, "rhotic").unwrap_err();
        assert!(format!("{err}").starts_with("ambiguous annotation"));
        let err = extract_rhotic_interval(&grid, "phones").unwrap_err();
        assert!(format!("{err}").contains("available: rhotic"));
        let empty = tier_grid(&[("  ", 0.0, 1.0)]);
        assert!(matches!(
            extract_rhotic_interval(&empty, "rhotic"),
            Err(SegmentError::NoLabeledInterval(_))
        ));
    }

    #[test]
    fn even_division_pairs_frames() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let iv = RhoticInterval::new(0.0, 0.2, "r").unwrap();
        let b = bin_segment(&series(values, 0.0), &iv, 10).unwrap();
        assert_eq!(b.occupancy, vec![2; 10]);
        for k in 0..10 {
            assert_eq!(b.bins[k][0], 2.0 * k as f64 + 0.5);
        }
    }

    #[test]
    fn constant_channel_constant_bins() {
        let iv = RhoticInterval::new(0.1, 0.37, "r").unwrap();
        let b = bin_segment(&series(vec![3.5; 60], 0.0), &iv, 10).unwrap();
        assert!(b.bins.iter().all(|row| row[0] == 3.5));
    }

    // Exact oracle: frame times and bin edges in integer units of 1/3000 s.
    fn oracle_occupancy(n_frames: usize, n_bins: usize, frame_units: usize, interval_units: usize) -> Vec<usize> {
        let mut occ = vec![0; n_bins];
        for k in 0..n_frames {
            let t = k * frame_units;
            if t < interval_units {
                occ[t * n_bins / interval_units] += 1;
            }
        }
        occ
    }

    #[test]
    fn fifteen_frames_alternate() {
        let iv = RhoticInterval::new(0.0, 0.15, "r").unwrap();
        let b = bin_segment(&series(vec![1.0; 15], 0.0), &iv, 10).unwrap();
        assert_eq!(b.occupancy, vec![2, 1, 2, 1, 2, 1, 2, 1, 2, 1]);
        assert_eq!(b.occupancy, oracle_occupancy(15, 10, 30, 450));
    }

    #[test]
    fn short_interval_fills_empty_bins() {
        // 4 frames over 10 bins
        let iv = RhoticInterval::new(0.0, 0.04, "r").unwrap();
        let b = bin_segment(&series(vec![1.0, 2.0, 3.0, 4.0, 9.0], 0.0), &iv, 10).unwrap();
        assert_eq!(b.occupancy, vec![1, 0, 1, 0, 0, 1, 0, 1, 0, 0]);
        let ch = b.channel(0);
        assert_eq!(ch, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn interval_outside_series() {
        let iv = RhoticInterval::new(0.5, 0.9, "r").unwrap();
        assert!(matches!(
            bin_segment(&series(vec![0.0; 50], 0.0), &iv, 10),
            Err(SegmentError::OutsideSeries { .. })
        ));
    }

    #[test]
    fn uniform_occupancy_preserves_mean() {
        let values: Vec<f64> = (0..30).map(|i| libm::sin(i as f64)).collect();
        let iv = RhoticInterval::new(0.0, 0.3, "r").unwrap();
        let b = bin_segment(&series(values.clone(), 0.0), &iv, 10).unwrap();
        let bin_mean = b.channel(0).iter().sum::<f64>() / 10.0;
        let frame_mean = values.iter().sum::<f64>() / 30.0;
        assert!((bin_mean - frame_mean).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn occupancy_matches_oracle(n_frames in 1usize..80, interval_frames in 1usize..80, n_bins in 1usize..15) {
            prop_assume!(interval_frames <= n_frames);
            let iv = RhoticInterval::new(0.0, interval_frames as f64 / 100.0, "r").unwrap();
            let s = series(vec![0.0; n_frames], 0.0);
            let occ = assign_bins(&s, &iv, n_bins);
            let mut counts = vec![0; n_bins];
            for b in occ.into_iter().flatten() {
                counts[b] += 1;
            }
            prop_assert_eq!(counts, oracle_occupancy(n_frames, n_bins, 1, interval_frames));
        }

        #[test]
        fn time_shift_equivariance(
            values in proptest::collection::vec(-5.0f64..5.0, 40..80),
            start_frame in 0usize..20,
            len_frames in 5usize..20,
            shift in prop_oneof![Just(0.25), Just(0.5), Just(1.0), Just(2.0)],
        ) {
            let s = series(values, 0.0);
            let iv = RhoticInterval::new(start_frame as f64 / 100.0, (start_frame + len_frames) as f64 / 100.0, "r").unwrap();
            let moved = RhoticInterval::new(iv.start_s + shift, iv.end_s + shift, "r").unwrap();
            let a = bin_segment(&s, &iv, 10).unwrap();
            let b = bin_segment(&s.shifted(shift), &moved, 10).unwrap();
            prop_assert_eq!(a.occupancy, b.occupancy);
            prop_assert_eq!(a.bins, b.bins);
        }

        #[test]
        fn bin_mean_weighting(values in proptest::collection::vec(-5.0f64..5.0, 20..60), len in 10usize..40) {
            prop_assume!(len <= values.len());
            let s = series(values.clone(), 0.0);
            let iv = RhoticInterval::new(0.0, len as f64 / 100.0, "r").unwrap();
            let b = bin_segment(&s, &iv, 10).unwrap();
            let bin_mean = b.channel(0).iter().sum::<f64>() / 10.0;
            let inside = &values[..len];
            let frame_mean = inside.iter().sum::<f64>() / len as f64;
            let max_dev = inside.iter().map(|v| (v - frame_mean).abs()).fold(0.0, f64::max);
            // each bin holds at least one frame here; bin weights differ from
            // frame weights by at most one frame per bin
            prop_assert!((bin_mean - frame_mean).abs() <= max_dev + 1e-12);
            if len % 10 == 0 {
                prop_assert!((bin_mean - frame_mean).abs() < 1e-12);
            }
        }
    }
}

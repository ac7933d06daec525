use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectSize::Negligible => "negligible",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

impl core::fmt::Display for EffectSize {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_effect_size(d: f64) -> EffectSize {
    let a = d.abs();
    if a < 0.2 {
        EffectSize::Negligible
    } else if a < 0.5 {
        EffectSize::Small
    } else if a < 0.8 {
        EffectSize::Medium
    } else {
        EffectSize::Large
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub d: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n0: usize,
    pub n1: usize,
    pub label: EffectSize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Pooled-SD standardized difference `(mean0 − mean1) / s_pooled` with a
/// normal-approximation 95% interval.
pub fn cohens_d(group0: &[f64], group1: &[f64]) -> Result<EffectSizeResult, StatsError> {
    let smaller = group0.len().min(group1.len());
    if smaller < 2 {
        return Err(StatsError::Undersized { needed: 2, got: smaller });
    }
    if group0.iter().chain(group1).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (n0, n1) = (group0.len() as f64, group1.len() as f64);
    let (m0, v0) = mean_var(group0);
    let (m1, v1) = mean_var(group1);
    let pooled = libm::sqrt(((n0 - 1.0) * v0 + (n1 - 1.0) * v1) / (n0 + n1 - 2.0));
    if !(pooled > 0.0) {
        return Err(StatsError::ZeroPooledSd);
    }
    let d = (m0 - m1) / pooled;
    let se = libm::sqrt((n0 + n1) / (n0 * n1) + d * d / (2.0 * (n0 + n1)));
    Ok(EffectSizeResult {
        d,
        ci_low: d - Z_95 * se,
        ci_high: d + Z_95 * se,
        n0: group0.len(),
        n1: group1.len(),
        label: classify_effect_size(d),
    })
}

/// Mean of one bin for one class with its 95% interval of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub bin: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Per-bin mean ± 1.96·sd/√n over `segments` (each a sequence of bin values
/// for one channel), using the sample SD.
pub fn trajectory_with_ci(segments: &[Vec<f64>]) -> Result<Vec<TrajectoryPoint>, StatsError> {
    if segments.len() < 2 {
        return Err(StatsError::Undersized {
            needed: 2,
            got: segments.len(),
        });
    }
    let bins = segments[0].len();
    if let Some(bad) = segments.iter().find(|s| s.len() != bins) {
        return Err(StatsError::LengthMismatch(bins, bad.len()));
    }
    let n = segments.len();
    Ok((0..bins)
        .map(|b| {
            let column: Vec<f64> = segments.iter().map(|s| s[b]).collect();
            let (mean, var) = mean_var(&column);
            let half = Z_95 * libm::sqrt(var) / libm::sqrt(n as f64);
            TrajectoryPoint {
                bin: b,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
                n,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    extern crate std;

    #[test]
    fn hand_example() {
        let r = cohens_d(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.d - 1.0).abs() < 1e-15);
        assert_eq!(r.label, EffectSize::Large);
        let se = (6.0f64 / 9.0 + 1.0 / 12.0).sqrt();
        assert!((r.ci_high - (1.0 + 1.96 * se)).abs() < 1e-12);
    }

    #[test]
    fn identical_groups() {
        let r = cohens_d(&[1.0, 4.0, 2.0], &[1.0, 4.0, 2.0]).unwrap();
        assert_eq!(r.d, 0.0);
        assert!(r.ci_low < 0.0 && r.ci_high > 0.0);
        assert_eq!(cohens_d(&[5.0, 5.0], &[5.0, 5.0]), Err(StatsError::ZeroPooledSd));
        assert!(matches!(cohens_d(&[1.0], &[1.0, 2.0]), Err(StatsError::Undersized { .. })));
    }

    #[test]
    fn labels() {
        assert_eq!(classify_effect_size(0.39), EffectSize::Small);
        assert_eq!(classify_effect_size(0.08), EffectSize::Negligible);
        assert_eq!(classify_effect_size(-0.22), EffectSize::Small);
        assert_eq!(classify_effect_size(0.5), EffectSize::Medium);
        assert_eq!(classify_effect_size(-0.8), EffectSize::Large);
    }

    #[test]
    fn trajectory_examples() {
        let same = trajectory_with_ci(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(same.iter().all(|p| p.ci_low == p.mean && p.ci_high == p.mean));
        let pair = trajectory_with_ci(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(pair[0].mean, 1.0);
        assert!((pair[0].ci_high - (1.0 + 1.96)).abs() < 1e-12);
        assert!((pair[0].ci_low - (1.0 - 1.96)).abs() < 1e-12);
    }

    #[test]
    fn ci_width_scales_inverse_sqrt_n() {
        // alternating ±1 columns have the same sample SD shape at both sizes
        let make = |n: usize| -> Vec<Vec<f64>> {
            let sd_target = 1.0;
            let base: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let m = base.iter().sum::<f64>() / n as f64;
            let sd = (base.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            base.iter().map(|x| vec![(x - m) / sd * sd_target]).collect()
        };
        let w = |segs: &[Vec<f64>]| {
            let p = trajectory_with_ci(segs).unwrap()[0];
            p.ci_high - p.ci_low
        };
        assert!((w(&make(4)) / w(&make(16)) - 2.0).abs() < 1e-9);
    }

    fn two_pass(a: &[f64], b: &[f64]) -> f64 {
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let ssa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let ssb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
        (ma - mb) / ((ssa + ssb) / (a.len() + b.len() - 2) as f64).sqrt()
    }

    proptest! {
        #[test]
        fn antisymmetric_and_scale_free(
            a in proptest::collection::vec(-10.0f64..10.0, 2..30),
            b in proptest::collection::vec(-10.0f64..10.0, 2..30),
            c in prop_oneof![Just(0.5), Just(2.0), Just(4.0), Just(0.25)],
        ) {
            let ab = cohens_d(&a, &b).unwrap();
            let ba = cohens_d(&b, &a).unwrap();
            prop_assert_eq!(ab.d, -ba.d);
            // power-of-two scaling is exact in binary floating point
            let ca: Vec<f64> = a.iter().map(|x| x * c).collect();
            let cb: Vec<f64> = b.iter().map(|x| x * c).collect();
            prop_assert_eq!(cohens_d(&ca, &cb).unwrap().d, ab.d);
            prop_assert!((ab.d - two_pass(&a, &b)).abs() < 1e-10);
            prop_assert!(ab.ci_low <= ab.d && ab.d <= ab.ci_high);
        }
    }
}

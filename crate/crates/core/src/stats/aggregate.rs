use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Mean, sample SD and median of per-fold values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample SD (n − 1 denominator); 0 when `sd_undefined`.
    pub sd: f64,
    pub sd_undefined: bool,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Summary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (sd, sd_undefined) = if n < 2 {
        (0.0, true)
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (libm::sqrt(ss / (n - 1) as f64), false)
    };
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        n,
        mean,
        sd,
        sd_undefined,
        median,
        min: sorted[0],
        max: sorted[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    extern crate std;

    #[test]
    fn three_folds() {
        let s = aggregate(&[0.9, 0.8, 0.7]).unwrap();
        assert!((s.mean - 0.8).abs() < 1e-12);
        assert_eq!(s.median, 0.8);
    }

    #[test]
    fn single_fold_flags_sd() {
        let s = aggregate(&[0.7]).unwrap();
        assert_eq!((s.sd, s.sd_undefined), (0.0, true));
        assert_eq!(aggregate(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn six_folds() {
        let s = aggregate(&[0.92, 0.95, 0.85, 0.90, 0.95, 0.83]).unwrap();
        assert!((s.mean - 0.90).abs() < 1e-12);
        assert!((s.median - 0.91).abs() < 1e-12);
        assert!((s.sd - 0.050596).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn median_between_extremes(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            let s = aggregate(&v).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max);
            prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        }
    }
}

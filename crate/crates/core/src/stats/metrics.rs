use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::dataset::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Support-weighted precision, recall and F1 over the two classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_class: [ClassMetrics; 2],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores at or above `threshold` are predicted rhotic. Ratios with a zero
/// denominator are 0.
pub fn confusion_metrics(scores: &[f64], labels: &[Label], threshold: f64) -> Result<WeightedMetrics, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch(scores.len(), labels.len()));
    }
    // counts[true][pred]
    let mut counts = [[0usize; 2]; 2];
    for (&s, &l) in scores.iter().zip(labels) {
        let pred = usize::from(s >= threshold);
        counts[l as usize][pred] += 1;
    }
    let class = |c: usize| {
        let tp = counts[c][c];
        let support = counts[c][0] + counts[c][1];
        let predicted = counts[0][c] + counts[1][c];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    let per_class = [class(0), class(1)];
    let n = scores.len() as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n;
    Ok(WeightedMetrics {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        accuracy: ratio(counts[0][0] + counts[1][1], scores.len()),
        per_class,
    })
}

/// Probability that a random rhotic example outscores a random derhotic one,
/// ties counting one half. Computed from tie-averaged ranks in exact integer
/// arithmetic, so it equals the pair-count definition bit for bit.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64, StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let n1 = labels.iter().filter(|&&l| l == Label::Rhotic).count() as u128;
    let n0 = labels.len() as u128 - n1;
    if n0 == 0 || n1 == 0 {
        return Err(StatsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum over positives of twice their (average) rank
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled = (i + 1 + j + 1) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == Label::Rhotic).count() as u128;
        doubled_rank_sum += doubled * positives;
        i = j + 1;
    }
    // 2U = 2·Σranks − n1(n1+1) = 2·(wins) + ties
    let twice_u = doubled_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n0 * n1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    extern crate std;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&x| Label::from_u8(x).unwrap()).collect()
    }

    fn pair_count(scores: &[f64], labels: &[Label]) -> f64 {
        let (mut twice, mut pairs) = (0u64, 0u64);
        for (i, &l) in labels.iter().enumerate() {
            if l != Label::Rhotic {
                continue;
            }
            for (j, &m) in labels.iter().enumerate() {
                if m != Label::Derhotic {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn auroc_examples() {
        let l = labels(&[0, 0, 1, 1]);
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &l).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.2, 0.6, 0.8], &l).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &l).unwrap(), 0.5);
        assert_eq!(auroc(&[0.3, 0.4], &labels(&[1, 1])), Err(StatsError::SingleClass));
    }

    #[test]
    fn weighted_f1_example() {
        // predictions [0,0,1,1]: class 0 F1 0.8 (support 3), class 1 F1 2/3
        let m = confusion_metrics(&[0.1, 0.2, 0.7, 0.9], &labels(&[0, 0, 0, 1]), 0.5).unwrap();
        assert!((m.f1 - (3.0 * 0.8 + 2.0 / 3.0) / 4.0).abs() < 1e-12);
        assert!((m.f1 - 0.7667).abs() < 1e-4);
    }

    #[test]
    fn perfect_predictions() {
        let m = confusion_metrics(&[0.1, 0.9, 0.6], &labels(&[0, 1, 1]), 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn unpredicted_class_has_zero_precision() {
        let m = confusion_metrics(&[0.1, 0.2], &labels(&[0, 1]), 0.5).unwrap();
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
        assert!(m.f1.is_finite() && m.precision.is_finite());
        assert_eq!(m.precision, 0.25);
        assert_eq!(confusion_metrics(&[], &[], 0.5), Err(StatsError::Empty));
    }

    proptest! {
        #[test]
        fn auroc_equals_pair_count(raw in proptest::collection::vec((0u8..8, any::<bool>()), 2..50)) {
            // coarse scores force plenty of ties
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 8.0).collect();
            let l: Vec<Label> = raw.iter().map(|(_, b)| if *b { Label::Rhotic } else { Label::Derhotic }).collect();
            prop_assume!(l.contains(&Label::Rhotic) && l.contains(&Label::Derhotic));
            prop_assert_eq!(auroc(&scores, &l).unwrap(), pair_count(&scores, &l));
        }

        #[test]
        fn auroc_rank_invariant(raw in proptest::collection::vec((-3.0f64..3.0, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let l: Vec<Label> = raw.iter().map(|(_, b)| if *b { Label::Rhotic } else { Label::Derhotic }).collect();
            prop_assume!(l.contains(&Label::Rhotic) && l.contains(&Label::Derhotic));
            let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
            prop_assert_eq!(auroc(&scores, &l).unwrap(), auroc(&squashed, &l).unwrap());
        }

        #[test]
        fn weighted_recall_is_accuracy(raw in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..80)) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let l: Vec<Label> = raw.iter().map(|(_, b)| if *b { Label::Rhotic } else { Label::Derhotic }).collect();
            let m = confusion_metrics(&scores, &l, DEFAULT_THRESHOLD).unwrap();
            prop_assert!((m.recall - m.accuracy).abs() < 1e-12);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn mismatch_rejected() {
        assert_eq!(auroc(&[0.1], &labels(&[0, 1])), Err(StatsError::LengthMismatch(1, 2)));
    }
}

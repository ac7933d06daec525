//! Labels, fixed-length input windows, leave-one-participant-out folds and
//! class weights.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FrameSeries;
use crate::rng;

/// Average rating at or above which an utterance counts as fully rhotic.
pub const RHOTIC_FLOOR: f64 = 0.66;
/// Frames per input window (2 s at 100 Hz).
pub const WINDOW_FRAMES: usize = 200;
pub const DEFAULT_VAL_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("rating {0} outside [0, 1]")]
    RatingOutOfRange(f64),
    #[error("empty series")]
    EmptySeries,
    #[error("non-finite value in channel {channel}, frame {frame}")]
    NonFinite { channel: usize, frame: usize },
    #[error("leave-one-participant-out needs at least 2 participants, found {0}")]
    TooFewParticipants(usize),
    #[error("validation fraction {0} outside (0, 0.5)")]
    BadValFraction(f64),
    #[error("cannot weight single-class data")]
    SingleClass,
    #[error("examples disagree on channel count ({expected} vs {actual})")]
    ChannelMismatch { expected: usize, actual: usize },
}

/// Binary perceptual label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Derhotic = 0,
    Rhotic = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Derhotic),
            1 => Some(Label::Rhotic),
            _ => None,
        }
    }
}

pub fn derive_label(avg_rating: f64) -> Result<Label, DatasetError> {
    if !(0.0..=1.0).contains(&avg_rating) {
        return Err(DatasetError::RatingOutOfRange(avg_rating));
    }
    Ok(if avg_rating >= RHOTIC_FLOOR {
        Label::Rhotic
    } else {
        Label::Derhotic
    })
}

/// A `frames × channels` matrix stored frame-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub frames: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureWindow {
    pub fn at(&self, frame: usize, channel: usize) -> f64 {
        self.data[frame * self.channels + channel]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.channels..(frame + 1) * self.channels]
    }
}

/// Range of source frames kept and the number of leading zero frames.
pub fn window_layout(len: usize, target: usize) -> (usize, usize, usize) {
    if len >= target {
        let start = (len - target) / 2;
        (start, target, 0)
    } else {
        (0, len, (target - len) / 2)
    }
}

/// Centre-crops or symmetrically zero-pads to [`WINDOW_FRAMES`] frames. An odd
/// amount of padding puts the extra frame at the end.
pub fn window_sequence(series: &FrameSeries) -> Result<FeatureWindow, DatasetError> {
    window_sequence_to(series, WINDOW_FRAMES)
}

pub fn window_sequence_to(series: &FrameSeries, target: usize) -> Result<FeatureWindow, DatasetError> {
    if series.is_empty() {
        return Err(DatasetError::EmptySeries);
    }
    let c = series.n_channels();
    let (start, kept, front) = window_layout(series.len(), target);
    let mut data = vec![0.0; target * c];
    for (ch, values) in series.channels().iter().enumerate() {
        for i in 0..kept {
            let v = values[start + i];
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    channel: ch,
                    frame: start + i,
                });
            }
            data[(front + i) * c + ch] = v;
        }
    }
    Ok(FeatureWindow {
        frames: target,
        channels: c,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub utterance_id: String,
    pub participant_id: String,
    pub label: Label,
    pub features: FeatureWindow,
}

/// One leave-one-participant-out split. Index lists refer to the corpus
/// slice passed to [`lopo_splits`] and are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub test_participant: String,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per participant (ordered by participant id). Within a fold a
/// uniformly random `floor(n · val_fraction)` of the non-test examples,
/// drawn with seed `base_seed + fold index`, form the validation set.
pub fn lopo_splits(participants: &[&str], val_fraction: f64, base_seed: u64) -> Result<Vec<Fold>, DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 0.5) {
        return Err(DatasetError::BadValFraction(val_fraction));
    }
    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in participants.iter().enumerate() {
        by_participant.entry(p).or_default().push(i);
    }
    if by_participant.len() < 2 {
        return Err(DatasetError::TooFewParticipants(by_participant.len()));
    }
    let folds = by_participant
        .iter()
        .enumerate()
        .map(|(k, (&pid, test))| {
            let mut rest: Vec<usize> = (0..participants.len()).filter(|&i| participants[i] != pid).collect();
            // the small slack keeps e.g. 20 · 0.15 at 3 despite binary rounding
            let n_val = libm::floor(rest.len() as f64 * val_fraction + 1e-9) as usize;
            let mut r = rng::seeded(base_seed.wrapping_add(k as u64));
            rest.shuffle(&mut r);
            let mut validation = rest[..n_val].to_vec();
            let mut train = rest[n_val..].to_vec();
            validation.sort_unstable();
            train.sort_unstable();
            Fold {
                index: k,
                test_participant: pid.into(),
                train,
                validation,
                test: test.clone(),
            }
        })
        .collect();
    Ok(folds)
}

/// Inverse-frequency weights `w_c = N / (2 N_c)`.
pub fn class_weights(labels: &[Label]) -> Result<(f64, f64), DatasetError> {
    let n1 = labels.iter().filter(|&&l| l == Label::Rhotic).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(DatasetError::SingleClass);
    }
    let n = labels.len() as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FRAME_RATE_HZ;
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    extern crate std;

    fn ramp(len: usize) -> FrameSeries {
        let ch: Vec<f64> = (0..len).map(|i| i as f64 + 1.0).collect();
        FrameSeries::new(vec!["a".into(), "b".into()], vec![ch.clone(), ch], FRAME_RATE_HZ, 0.0).unwrap()
    }

    #[test]
    fn label_floor() {
        assert_eq!(derive_label(0.66).unwrap(), Label::Rhotic);
        assert_eq!(derive_label(0.65).unwrap(), Label::Derhotic);
        assert_eq!(derive_label(0.6599).unwrap(), Label::Derhotic);
        assert_eq!(derive_label(2.0 / 3.0).unwrap(), Label::Rhotic);
        assert!(derive_label(1.01).is_err());
        assert!(derive_label(f64::NAN).is_err());
    }

    #[test]
    fn window_identity() {
        let w = window_sequence(&ramp(200)).unwrap();
        assert_eq!(w.at(0, 0), 1.0);
        assert_eq!(w.at(199, 1), 200.0);
    }

    #[test]
    fn window_pads_symmetrically() {
        let w = window_sequence(&ramp(150)).unwrap();
        assert!((0..25).all(|f| w.frame(f) == [0.0, 0.0]));
        assert!((175..200).all(|f| w.frame(f) == [0.0, 0.0]));
        assert_eq!(w.at(25, 0), 1.0);
        assert_eq!(w.at(174, 0), 150.0);
        let odd = window_sequence(&ramp(151)).unwrap();
        // 49 pad frames: 24 in front, 25 behind
        assert_eq!(odd.at(23, 0), 0.0);
        assert_eq!(odd.at(24, 0), 1.0);
        assert_eq!(odd.at(174, 0), 151.0);
        assert_eq!(odd.at(175, 0), 0.0);
    }

    #[test]
    fn window_crops_centre() {
        // frames 50..249 of a 301-frame input
        let w = window_sequence(&ramp(301)).unwrap();
        assert_eq!(w.at(0, 0), 51.0);
        assert_eq!(w.at(199, 0), 250.0);
    }

    #[test]
    fn window_rejects_empty() {
        assert_eq!(window_sequence(&ramp(0)), Err(DatasetError::EmptySeries));
    }

    #[test]
    fn two_participants_ten_each() {
        let ids: Vec<&str> = (0..20).map(|i| if i < 10 { "p1" } else { "p2" }).collect();
        let folds = lopo_splits(&ids, 0.15, 7).unwrap();
        assert_eq!(folds.len(), 2);
        for f in &folds {
            assert_eq!((f.test.len(), f.validation.len(), f.train.len()), (10, 1, 9));
        }
        assert_eq!(folds[0].test_participant, "p1");
        assert_eq!(folds, lopo_splits(&ids, 0.15, 7).unwrap());
    }

    #[test]
    fn single_participant_rejected() {
        assert_eq!(lopo_splits(&["a", "a"], 0.15, 7), Err(DatasetError::TooFewParticipants(1)));
    }

    #[test]
    fn weights_examples() {
        let (w0, w1) = class_weights(&[Label::Derhotic, Label::Derhotic, Label::Derhotic, Label::Rhotic]).unwrap();
        assert!((w0 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(w1, 2.0);
        assert_eq!(class_weights(&[Label::Derhotic, Label::Rhotic]).unwrap(), (1.0, 1.0));
        let err = class_weights(&[Label::Derhotic; 3]).unwrap_err();
        assert_eq!(format!("{err}"), "cannot weight single-class data");
    }

    proptest! {
        #[test]
        fn folds_never_leak(assign in proptest::collection::vec(0u8..5, 2..120), seed in any::<u64>()) {
            let ids: Vec<std::string::String> = assign.iter().map(|p| format!("p{p}")).collect();
            let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
            let distinct = refs.iter().collect::<std::collections::BTreeSet<_>>().len();
            prop_assume!(distinct >= 2);
            let folds = lopo_splits(&refs, 0.15, seed).unwrap();
            prop_assert_eq!(folds.len(), distinct);
            for f in &folds {
                prop_assert!(f.test.iter().all(|&i| refs[i] == f.test_participant));
                prop_assert!(f.train.iter().chain(&f.validation).all(|&i| refs[i] != f.test_participant));
                prop_assert!(f.train.iter().all(|i| !f.validation.contains(i)));
                prop_assert_eq!(f.test.len() + f.train.len() + f.validation.len(), refs.len());
                let n_rest = refs.len() - f.test.len();
                prop_assert_eq!(f.validation.len(), n_rest * 15 / 100);
            }
        }

        #[test]
        fn weighted_count_is_count(labels in proptest::collection::vec(any::<bool>(), 2..300)) {
            let labels: Vec<Label> = labels.into_iter().map(|b| if b { Label::Rhotic } else { Label::Derhotic }).collect();
            prop_assume!(labels.contains(&Label::Rhotic) && labels.contains(&Label::Derhotic));
            let (w0, w1) = class_weights(&labels).unwrap();
            let n1 = labels.iter().filter(|&&l| l == Label::Rhotic).count() as f64;
            let n0 = labels.len() as f64 - n1;
            prop_assert!((w0 * n0 + w1 * n1 - labels.len() as f64).abs() < 1e-9);
        }

        #[test]
        fn label_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(derive_label(lo).unwrap() <= derive_label(hi).unwrap());
        }

        #[test]
        fn window_always_full(len in 1usize..420) {
            let w = window_sequence(&ramp(len)).unwrap();
            prop_assert_eq!(w.data.len(), WINDOW_FRAMES * 2);
            let (_, kept, front) = window_layout(len, WINDOW_FRAMES);
            let pad_abs: f64 = (0..WINDOW_FRAMES)
                .filter(|&f| f < front || f >= front + kept)
                .map(|f| w.frame(f).iter().map(|v| v.abs()).sum::<f64>())
                .sum();
            prop_assert_eq!(pad_abs, 0.0);
        }
    }

    #[test]
    fn fold_ids_are_strings() {
        let folds = lopo_splits(&["b", "a", "b"], 0.2, 1).unwrap();
        assert_eq!(folds[0].test_participant, "a".to_string());
        assert_eq!(folds[1].test, vec![0, 2]);
    }
}

//! Per-class F1 scores.

use serde::{Deserialize, Serialize};

use crate::corpus::Sex;
use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionCounts {
    pub fn support(&self) -> u64 {
        self.true_positive + self.false_negative
    }

    /// `None` when the class occurs in neither truth nor prediction.
    pub fn f1(&self) -> Option<f64> {
        let (tp, fp, fn_) = (self.true_positive, self.false_positive, self.false_negative);
        if tp + fp + fn_ == 0 {
            return None;
        }
        // algebraically equal to 2PR/(P+R); zero when tp = 0
        Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
    }
}

/// Counts for both classes, indexed by [`Sex::index`].
pub fn confusion(y_true: &[Sex], y_pred: &[Sex]) -> Result<[ConfusionCounts; 2]> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let mut c = [ConfusionCounts::default(); 2];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for s in Sex::ALL {
            let k = &mut c[s.index()];
            match (t == s, p == s) {
                (true, true) => k.true_positive += 1,
                (false, true) => k.false_positive += 1,
                (true, false) => k.false_negative += 1,
                (false, false) => k.true_negative += 1,
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub f1_f: Option<f64>,
    pub f1_m: Option<f64>,
    /// Unweighted mean over the defined per-class scores.
    pub mean_f1: f64,
    /// Support-weighted mean.
    pub weighted_f1: f64,
}

impl F1Scores {
    pub fn for_class(&self, s: Sex) -> Option<f64> {
        match s {
            Sex::F => self.f1_f,
            Sex::M => self.f1_m,
        }
    }
}

pub fn f1_from_counts(c: &[ConfusionCounts; 2]) -> F1Scores {
    let f1 = [c[0].f1(), c[1].f1()];
    let defined: Vec<f64> = f1.iter().flatten().copied().collect();
    let mean_f1 = defined.iter().sum::<f64>() / defined.len() as f64;
    let n = (c[0].support() + c[1].support()) as f64;
    let weighted_f1 = (0..2)
        .map(|i| c[i].support() as f64 / n * f1[i].unwrap_or(0.0))
        .sum();
    F1Scores {
        f1_f: f1[0],
        f1_m: f1[1],
        mean_f1,
        weighted_f1,
    }
}

pub fn f1_per_class(y_true: &[Sex], y_pred: &[Sex]) -> Result<F1Scores> {
    Ok(f1_from_counts(&confusion(y_true, y_pred)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(s: &str) -> Vec<Sex> {
        s.chars().map(|c| if c == 'F' { Sex::F } else { Sex::M }).collect()
    }

    #[test]
    fn perfect_predictions() {
        let y = labels("FFMMFM");
        let s = f1_per_class(&y, &y).unwrap();
        assert_eq!((s.f1_f, s.f1_m, s.mean_f1, s.weighted_f1), (Some(1.0), Some(1.0), 1.0, 1.0));
    }

    #[test]
    fn two_thirds_case() {
        // F: tp = 2, fp = 1, fn = 1
        let s = f1_per_class(&labels("FFFM"), &labels("FFMF")).unwrap();
        assert!((s.f1_f.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_f_on_balanced_set() {
        let t: Vec<Sex> = (0..100).map(|i| if i < 50 { Sex::F } else { Sex::M }).collect();
        let s = f1_per_class(&t, &[Sex::F; 100]).unwrap();
        assert!((s.f1_f.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.f1_m, Some(0.0));
        assert!((s.mean_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_excluded() {
        let s = f1_per_class(&labels("FFF"), &labels("FFF")).unwrap();
        assert_eq!(s.f1_m, None);
        assert_eq!(s.mean_f1, 1.0);
    }

    #[test]
    fn errors() {
        assert!(f1_per_class(&[], &[]).is_err());
        assert!(f1_per_class(&labels("F"), &labels("FM")).is_err());
    }

    proptest! {
        #[test]
        fn label_swap_symmetry(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let sex = |b: bool| if b { Sex::M } else { Sex::F };
            let t: Vec<Sex> = pairs.iter().map(|p| sex(p.0)).collect();
            let p: Vec<Sex> = pairs.iter().map(|p| sex(p.1)).collect();
            let a = f1_per_class(&t, &p).unwrap();
            let ts: Vec<Sex> = t.iter().map(|s| s.other()).collect();
            let ps: Vec<Sex> = p.iter().map(|s| s.other()).collect();
            let b = f1_per_class(&ts, &ps).unwrap();
            prop_assert_eq!(a.f1_f, b.f1_m);
            prop_assert_eq!(a.f1_m, b.f1_f);
            prop_assert!((a.mean_f1 - b.mean_f1).abs() < 1e-15);
        }

        #[test]
        fn weighted_equals_mean_for_equal_supports(preds in prop::collection::vec(any::<bool>(), 20)) {
            let t: Vec<Sex> = (0..20).map(|i| if i % 2 == 0 { Sex::F } else { Sex::M }).collect();
            let p: Vec<Sex> = preds.iter().map(|&b| if b { Sex::M } else { Sex::F }).collect();
            let s = f1_per_class(&t, &p).unwrap();
            prop_assert!((s.mean_f1 - s.weighted_f1).abs() < 1e-15);
        }
    }
}

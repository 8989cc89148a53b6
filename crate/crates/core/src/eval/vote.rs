//! Per-subject majority voting over sample predictions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sex;
use crate::model::Prediction;

/// A held-out sample prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePrediction {
    pub subject_id: String,
    pub truth: Sex,
    pub prediction: Prediction,
}

/// How a subject's label was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteDecision {
    Majority,
    /// Equal sample votes, resolved by mean vote fraction.
    VoteFraction,
    /// Equal votes and equal vote fractions: defaulted to F.
    ExactTie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVote {
    pub subject_id: String,
    pub truth: Sex,
    pub label: Sex,
    /// Sample votes per class, indexed by [`Sex::index`].
    pub votes: [usize; 2],
    pub decision: VoteDecision,
}

/// Mean vote fraction of class `c` over the samples predicted as `c`.
fn mean_confidence(samples: &[&SamplePrediction], c: Sex) -> f64 {
    let v: Vec<f64> = samples
        .iter()
        .filter(|s| s.prediction.label == c)
        .map(|s| s.prediction.vote_fraction[c.index()])
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Subject label = class with most sample votes. A split vote goes to the
/// class whose predicted samples carry the higher mean vote fraction; an
/// exact tie goes to F and is flagged. Output is ordered by subject id.
pub fn subject_vote(samples: &[SamplePrediction]) -> Vec<SubjectVote> {
    let mut by_subject: BTreeMap<&str, Vec<&SamplePrediction>> = BTreeMap::new();
    for s in samples {
        by_subject.entry(&s.subject_id).or_default().push(s);
    }
    by_subject
        .into_iter()
        .map(|(id, ss)| {
            let mut votes = [0usize; 2];
            for s in &ss {
                votes[s.prediction.label.index()] += 1;
            }
            let (label, decision) = if votes[0] != votes[1] {
                (if votes[0] > votes[1] { Sex::F } else { Sex::M }, VoteDecision::Majority)
            } else {
                let (cf, cm) = (mean_confidence(&ss, Sex::F), mean_confidence(&ss, Sex::M));
                if cf > cm {
                    (Sex::F, VoteDecision::VoteFraction)
                } else if cm > cf {
                    (Sex::M, VoteDecision::VoteFraction)
                } else {
                    (Sex::F, VoteDecision::ExactTie)
                }
            };
            SubjectVote {
                subject_id: id.to_string(),
                truth: ss[0].truth,
                label,
                votes,
                decision,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, label: Sex, conf: f64) -> SamplePrediction {
        let mut vote_fraction = [1.0 - conf, conf];
        if label == Sex::F {
            vote_fraction.swap(0, 1);
        }
        SamplePrediction {
            subject_id: id.into(),
            truth: Sex::M,
            prediction: Prediction { label, vote_fraction },
        }
    }

    #[test]
    fn majority() {
        let v = subject_vote(&[sample("a", Sex::M, 0.9), sample("a", Sex::M, 0.8), sample("a", Sex::F, 0.7)]);
        assert_eq!((v[0].label, v[0].decision), (Sex::M, VoteDecision::Majority));
    }

    #[test]
    fn singleton() {
        assert_eq!(subject_vote(&[sample("a", Sex::F, 0.6)])[0].label, Sex::F);
    }

    #[test]
    fn split_vote_uses_vote_fraction() {
        let v = subject_vote(&[
            sample("a", Sex::F, 0.6),
            sample("a", Sex::F, 0.6),
            sample("a", Sex::M, 0.55),
            sample("a", Sex::M, 0.55),
        ]);
        assert_eq!((v[0].label, v[0].decision), (Sex::F, VoteDecision::VoteFraction));
        let v = subject_vote(&[sample("b", Sex::F, 0.51), sample("b", Sex::M, 0.9)]);
        assert_eq!(v[0].label, Sex::M);
    }

    #[test]
    fn exact_tie_defaults_to_f() {
        let v = subject_vote(&[sample("a", Sex::M, 0.7), sample("a", Sex::F, 0.7)]);
        assert_eq!((v[0].label, v[0].decision), (Sex::F, VoteDecision::ExactTie));
    }

    #[test]
    fn subjects_are_ordered() {
        let v = subject_vote(&[sample("b", Sex::M, 1.0), sample("a", Sex::M, 1.0)]);
        assert_eq!(v.iter().map(|s| s.subject_id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
    }
}

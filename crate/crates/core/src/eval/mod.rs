//! Scoring, subject voting, the experiment matrix and group statistics.

mod experiment;
pub mod metrics;
mod report;
mod stats;
mod vote;

pub use experiment::{
    run_cell, run_experiment, stats_table, Cell, CellKey, CellOutcome, CellResult, ClusterScope, Clustering,
    EvaluationReport, ExperimentConfig, ImportanceEntry, SmoteStage, SpeechSelection,
};
pub use metrics::{confusion, f1_from_counts, f1_per_class, ConfusionCounts, F1Scores};
pub use report::{
    format_scores_table, write_importance_csv, write_scores_csv, write_stats_csv, IMPORTANCE_HEADER, SCORES_HEADER,
    STATS_HEADER,
};
pub use stats::{cohens_d, feature_stats, t_two_tailed_p, welch_t, CohensD, EffectBand, StatRow, WelchT};
pub use vote::{subject_vote, SamplePrediction, SubjectVote, VoteDecision};

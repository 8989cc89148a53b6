//! The experiment matrix: feature set x grouping x speech type x
//! clustering, each cell scored by subject-grouped outer cross-validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::metrics::{f1_per_class, F1Scores};
use super::stats::{feature_stats, StatRow};
use super::vote::{subject_vote, SamplePrediction, SubjectVote};
use crate::balance::{borderline_smote, LabeledMatrix};
use crate::clustering::{cluster_columns, FactorSet, DEFAULT_CUTOFF};
use crate::corpus::{group_samples, GroupingMode, Sex, SpeechType};
use crate::error::{Error, Result};
use crate::features::{assemble_matrix, fill_formant_position, inventory, FeatureRow, FeatureSet, INVENTORY_VERSION};
use crate::model::{derive_seed, default_grid, grid_search_with, stratified_group_folds, train_erf, CvOptions, ErfParams, FoldPrep, Forest};

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $token),+ })
            }
        }
        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(format!(concat!("unknown ", stringify!($name), " {:?}"), other)),
                }
            }
        }
    };
}

/// Which recordings a cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeechSelection {
    Scripted,
    Spontaneous,
    Both,
}

token_enum!(SpeechSelection { Scripted => "scripted", Spontaneous => "spontaneous", Both => "both" });

impl SpeechSelection {
    pub fn admits(self, s: SpeechType) -> bool {
        match self {
            SpeechSelection::Scripted => s == SpeechType::Scripted,
            SpeechSelection::Spontaneous => s == SpeechType::Spontaneous,
            SpeechSelection::Both => true,
        }
    }
}

/// Before clustering (raw features) or after clustering (factor scores).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Clustering {
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "AC")]
    Ac,
}

token_enum!(Clustering { Bc => "BC", Ac => "AC" });

/// Data the factor structure is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterScope {
    /// The training portion of each outer split.
    TrainingFolds,
    /// The whole cell, before splitting.
    Cohort,
}

token_enum!(ClusterScope { TrainingFolds => "training_folds", Cohort => "cohort" });

/// Whether oversampling happens in raw-feature or factor space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteStage {
    AfterTransform,
    BeforeTransform,
}

token_enum!(SmoteStage { AfterTransform => "after_transform", BeforeTransform => "before_transform" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub feature_sets: Vec<FeatureSet>,
    pub groupings: Vec<GroupingMode>,
    pub speech_types: Vec<SpeechSelection>,
    pub clustering: Vec<Clustering>,
    pub cutoff: f64,
    pub cluster_scope: ClusterScope,
    /// Borderline-SMOTE neighbour count; `None` disables oversampling.
    pub smote_k: Option<usize>,
    pub smote_stage: SmoteStage,
    pub grid: Vec<ErfParams>,
    /// Inner (grid search) folds.
    pub folds: usize,
    pub repeats: usize,
    pub outer_folds: usize,
    pub group_by_subject: bool,
    pub min_subjects_per_class: usize,
    /// Ages for the statistics table; empty means every age present.
    pub stats_ages: Vec<u8>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            feature_sets: FeatureSet::ALL.to_vec(),
            groupings: vec![GroupingMode::PerYear, GroupingMode::PerBand],
            speech_types: vec![SpeechSelection::Scripted, SpeechSelection::Spontaneous, SpeechSelection::Both],
            clustering: vec![Clustering::Bc, Clustering::Ac],
            cutoff: DEFAULT_CUTOFF,
            cluster_scope: ClusterScope::TrainingFolds,
            smote_k: Some(crate::balance::DEFAULT_K),
            smote_stage: SmoteStage::AfterTransform,
            grid: default_grid(),
            folds: 5,
            repeats: 5,
            outer_folds: 5,
            group_by_subject: true,
            min_subjects_per_class: 10,
            stats_ages: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CellKey {
    pub grouping: GroupingMode,
    pub group: String,
    pub feature_set: FeatureSet,
    pub speech_type: SpeechSelection,
    pub clustering: Clustering,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceEntry {
    pub factor: String,
    pub members: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    /// Subject-level F1 for girls and boys.
    pub f1_girls: Option<f64>,
    pub f1_boys: Option<f64>,
    pub mean_f1: f64,
    pub weighted_f1: f64,
    /// Sample-level scores before voting.
    pub sample_scores: F1Scores,
    pub n_factors: usize,
    pub n_rows: usize,
    pub dropped_rows: usize,
    pub n_subjects: [usize; 2],
    pub fold_params: Vec<ErfParams>,
    pub final_params: ErfParams,
    pub subjects: Vec<SubjectVote>,
    pub importance: Vec<ImportanceEntry>,
    #[serde(skip)]
    pub factor_set: Option<FactorSet>,
    #[serde(skip)]
    pub forest: Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Scored(Box<CellResult>),
    Insufficient { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub key: CellKey,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn result(&self) -> Option<&CellResult> {
        match &self.outcome {
            CellOutcome::Scored(r) => Some(r),
            CellOutcome::Insufficient { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub inventory_version: u32,
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub stats: Vec<StatRow>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cell(&self, group: &str, fs: FeatureSet, speech: SpeechSelection, cl: Clustering) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.key.group == group && c.key.feature_set == fs && c.key.speech_type == speech && c.key.clustering == cl
        })
    }
}

/// Per-split preparation inside a cell: optional factor transform plus
/// optional oversampling, in the configured order.
struct CellPrep<'a> {
    factors: Option<&'a FactorSet>,
    smote_k: Option<usize>,
    stage: SmoteStage,
}

impl CellPrep<'_> {
    fn transform(&self, d: &LabeledMatrix) -> Result<LabeledMatrix> {
        match self.factors {
            None => Ok(d.clone()),
            Some(fs) => Ok(LabeledMatrix {
                names: fs.names(),
                x: fs.transform_rows(&d.names, &d.x)?,
                ..d.clone()
            }),
        }
    }

    fn oversample(&self, d: &LabeledMatrix, seed: u64) -> Result<LabeledMatrix> {
        match self.smote_k {
            Some(k) => borderline_smote(d, k, seed),
            None => Ok(d.clone()),
        }
    }
}

impl FoldPrep for CellPrep<'_> {
    fn prepare(&self, train: &LabeledMatrix, valid: &LabeledMatrix, seed: u64) -> Result<(LabeledMatrix, LabeledMatrix)> {
        let train = match self.stage {
            SmoteStage::AfterTransform => self.oversample(&self.transform(train)?, seed)?,
            SmoteStage::BeforeTransform => self.transform(&self.oversample(train, seed)?)?,
        };
        Ok((train, self.transform(valid)?))
    }
}

fn fit_factors(d: &LabeledMatrix, cutoff: f64) -> Result<FactorSet> {
    let columns: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.x.iter().map(|r| r[j]).collect()).collect();
    cluster_columns(&d.names, &columns, cutoff)
}

/// Stable 64-bit key of a string, for seed derivation.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn subject_counts(d: &LabeledMatrix) -> [usize; 2] {
    let mut sets: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for (id, s) in d.subject_ids.iter().zip(&d.y) {
        sets[s.index()].insert(id);
    }
    [sets[0].len(), sets[1].len()]
}

/// Most frequent candidate among the per-fold winners; ties go to the
/// earliest grid entry.
fn consensus(grid: &[ErfParams], winners: &[usize]) -> ErfParams {
    let mut count = vec![0usize; grid.len()];
    for &w in winners {
        count[w] += 1;
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if count[i] > count[best] {
            best = i;
        }
    }
    grid[best].clone()
}

/// Scores one cell. Errors that mean "not enough data" become an
/// `Insufficient` outcome; anything else propagates.
pub fn run_cell(rows: &[FeatureRow], fs: FeatureSet, cl: Clustering, cfg: &ExperimentConfig, seed: u64) -> Result<CellOutcome> {
    match score_cell(rows, fs, cl, cfg, seed) {
        Err(Error::InsufficientData(reason)) => Ok(CellOutcome::Insufficient { reason }),
        other => other.map(|r| CellOutcome::Scored(Box::new(r))),
    }
}

fn score_cell(rows: &[FeatureRow], fs: FeatureSet, cl: Clustering, cfg: &ExperimentConfig, seed: u64) -> Result<CellResult> {
    if cfg.grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let m = assemble_matrix(rows, fs)?;
    let full = LabeledMatrix::from_matrix(&m);
    let n_subjects = subject_counts(&full);
    let needed = cfg.min_subjects_per_class.max(cfg.outer_folds);
    if n_subjects.iter().any(|&n| n < needed) {
        return Err(Error::insufficient(format!(
            "{} girls and {} boys, need {needed} subjects per class",
            n_subjects[0], n_subjects[1]
        )));
    }
    let cohort_factors = match (cl, cfg.cluster_scope) {
        (Clustering::Ac, ClusterScope::Cohort) => Some(fit_factors(&full, cfg.cutoff)?),
        _ => None,
    };
    let factors_for = |train: &LabeledMatrix| -> Result<Option<FactorSet>> {
        Ok(match cl {
            Clustering::Bc => None,
            Clustering::Ac => Some(match &cohort_factors {
                Some(f) => f.clone(),
                None => fit_factors(train, cfg.cutoff)?,
            }),
        })
    };
    let cv = CvOptions {
        folds: cfg.folds,
        repeats: cfg.repeats,
        group_by_subject: cfg.group_by_subject,
        smote_k: cfg.smote_k,
        seed: derive_seed(seed, &[1]),
    };

    let outer = stratified_group_folds(&full.y, &full.subject_ids, cfg.outer_folds, true, derive_seed(seed, &[0]))?;
    let mut predictions = Vec::new();
    let mut winners = Vec::new();
    for fold in 0..cfg.outer_folds {
        let train_idx: Vec<usize> = (0..full.len()).filter(|&i| outer[i] != fold).collect();
        let test_idx: Vec<usize> = (0..full.len()).filter(|&i| outer[i] == fold).collect();
        let (train_raw, test_raw) = (full.subset(&train_idx), full.subset(&test_idx));
        let factors = factors_for(&train_raw)?;
        let prep = CellPrep {
            factors: factors.as_ref(),
            smote_k: cfg.smote_k,
            stage: cfg.smote_stage,
        };
        let best = if cfg.grid.len() == 1 {
            0
        } else {
            let cv = CvOptions {
                seed: derive_seed(cv.seed, &[fold as u64]),
                ..cv.clone()
            };
            grid_search_with(&train_raw, &cfg.grid, &cv, &prep)?.best_index
        };
        winners.push(best);
        let fold_seed = derive_seed(seed, &[2, fold as u64]);
        let (train, test) = prep.prepare(&train_raw, &test_raw, derive_seed(fold_seed, &[1]))?;
        let params = ErfParams {
            seed: derive_seed(fold_seed, &[2]),
            ..cfg.grid[best].clone()
        };
        let forest = train_erf(&train, &params)?;
        for (i, x) in test.x.iter().enumerate() {
            predictions.push(SamplePrediction {
                subject_id: test.subject_ids[i].clone(),
                truth: test.y[i],
                prediction: forest.predict(x)?,
            });
        }
    }

    let truth: Vec<Sex> = predictions.iter().map(|p| p.truth).collect();
    let labels: Vec<Sex> = predictions.iter().map(|p| p.prediction.label).collect();
    let sample_scores = f1_per_class(&truth, &labels)?;
    let subjects = subject_vote(&predictions);
    let subject_truth: Vec<Sex> = subjects.iter().map(|s| s.truth).collect();
    let subject_labels: Vec<Sex> = subjects.iter().map(|s| s.label).collect();
    let scores = f1_per_class(&subject_truth, &subject_labels)?;

    let final_params = ErfParams {
        seed: derive_seed(seed, &[3]),
        ..consensus(&cfg.grid, &winners)
    };
    let factor_set = factors_for(&full)?;
    let prep = CellPrep {
        factors: factor_set.as_ref(),
        smote_k: cfg.smote_k,
        stage: cfg.smote_stage,
    };
    let (train, _) = prep.prepare(&full, &full.subset(&[]), derive_seed(seed, &[4]))?;
    let forest = train_erf(&train, &final_params)?;
    let table = forest.importance();
    let importance = table
        .names
        .iter()
        .zip(&table.weights)
        .enumerate()
        .map(|(j, (name, &weight))| ImportanceEntry {
            factor: name.clone(),
            members: match &factor_set {
                Some(f) => f.factors[j].members.clone(),
                None => vec![name.clone()],
            },
            weight,
        })
        .collect();

    Ok(CellResult {
        f1_girls: scores.f1_f,
        f1_boys: scores.f1_m,
        mean_f1: scores.mean_f1,
        weighted_f1: scores.weighted_f1,
        sample_scores,
        n_factors: factor_set.as_ref().map_or(m.n_cols(), FactorSet::len),
        n_rows: m.n_rows(),
        dropped_rows: m.dropped,
        n_subjects,
        fold_params: winners.iter().map(|&w| cfg.grid[w].clone()).collect(),
        final_params,
        subjects,
        importance,
        factor_set,
        forest,
    })
}

fn grouping_code(g: GroupingMode) -> u64 {
    match g {
        GroupingMode::PerYear => 0,
        GroupingMode::PerBand => 1,
    }
}

/// Runs every requested cell over the feature rows. Cells that lack data
/// are reported as insufficient and the run continues.
pub fn run_experiment(rows: &[FeatureRow], cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    let mut cells = Vec::new();
    for &grouping in &cfg.groupings {
        for &speech in &cfg.speech_types {
            let selected: Vec<FeatureRow> = rows.iter().filter(|r| speech.admits(r.key.speech_type)).cloned().collect();
            let groups = group_samples(&selected, grouping);
            for (group, members) in &groups {
                for (fi, &fs) in FeatureSet::ALL.iter().enumerate() {
                    if !cfg.feature_sets.contains(&fs) {
                        continue;
                    }
                    // clustering mode is deliberately not part of the seed path
                    let seed = derive_seed(
                        cfg.seed,
                        &[grouping_code(grouping), fnv1a(&group.label), fi as u64, speech as u64],
                    );
                    for &cl in &cfg.clustering {
                        info!("cell {grouping} {} {fs} {speech} {cl}", group.label);
                        let outcome = run_cell(members, fs, cl, cfg, seed)?;
                        if let CellOutcome::Insufficient { reason } = &outcome {
                            warn!("cell {} {fs} {speech} {cl}: insufficient data: {reason}", group.label);
                        }
                        cells.push(Cell {
                            key: CellKey {
                                grouping,
                                group: group.label.clone(),
                                feature_set: fs,
                                speech_type: speech,
                                clustering: cl,
                            },
                            outcome,
                        });
                    }
                }
            }
        }
    }
    Ok(EvaluationReport {
        inventory_version: INVENTORY_VERSION,
        config: cfg.clone(),
        cells,
        stats: stats_table(rows, &cfg.stats_ages),
    })
}

/// Statistics over every inventory feature present in `rows`, with pF
/// computed per age-year. An empty `ages` selects every age present.
pub fn stats_table(rows: &[FeatureRow], ages: &[u8]) -> Vec<StatRow> {
    let mut rows = rows.to_vec();
    if rows.iter().any(|r| r.features.contains("F1_mean")) && rows.iter().all(|r| r.features.contains("pF")) {
        fill_formant_position(&mut rows);
    }
    let ages: Vec<u8> = if ages.is_empty() {
        rows.iter().map(|r| r.key.age).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        ages.to_vec()
    };
    let present: BTreeMap<&str, ()> = rows.iter().flat_map(|r| r.features.names()).map(|n| (n, ())).collect();
    let names: Vec<&str> = inventory().iter().copied().filter(|n| present.contains_key(n)).collect();
    feature_stats(&rows, &ages, &names)
}

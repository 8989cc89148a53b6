//! Stratified, subject-grouped cross-validation and exhaustive grid search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{train_erf, CandidateCount, ErfParams};
use super::derive_seed;
use crate::balance::{borderline_smote, LabeledMatrix};
use crate::corpus::Sex;
use crate::error::{Error, Result};
use crate::eval::metrics::f1_per_class;

/// Fold assignment per row. Rows of one subject share a fold unless
/// `grouped` is false; subjects are dealt class by class to the fold that
/// currently holds the fewest rows of that class.
pub fn stratified_group_folds(
    y: &[Sex],
    subject_ids: &[String],
    folds: usize,
    grouped: bool,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("at least 2 folds are required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![usize::MAX; y.len()];
    for class in Sex::ALL {
        // group key -> row indices; BTreeMap keeps the pre-shuffle order canonical
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, (&s, id)) in y.iter().zip(subject_ids).enumerate() {
            if s == class {
                let key = if grouped { id.clone() } else { format!("{i:012}") };
                groups.entry(key).or_default().push(i);
            }
        }
        if groups.len() < folds {
            return Err(Error::insufficient(format!(
                "class {class} has {} {} for {folds} folds",
                groups.len(),
                if grouped { "subjects" } else { "rows" }
            )));
        }
        let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
        groups.shuffle(&mut rng);
        let mut load = vec![0usize; folds];
        for g in groups {
            let f = (0..folds).min_by_key(|&f| (load[f], f)).unwrap();
            load[f] += g.len();
            for i in g {
                assignment[i] = f;
            }
        }
    }
    Ok(assignment)
}

/// Cross-validation protocol shared by the grid search and the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub repeats: usize,
    pub group_by_subject: bool,
    /// Borderline-SMOTE neighbour count; `None` disables oversampling.
    pub smote_k: Option<usize>,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            repeats: 5,
            group_by_subject: true,
            smote_k: Some(crate::balance::DEFAULT_K),
            seed: 0,
        }
    }
}

/// Oversamples `train` when enabled and unbalanced.
pub fn prepare_training(train: &LabeledMatrix, smote_k: Option<usize>, seed: u64) -> Result<LabeledMatrix> {
    match smote_k {
        Some(k) => borderline_smote(train, k, seed),
        None => Ok(train.clone()),
    }
}

/// Default search space: 2 x 2 x 2 candidates.
pub fn default_grid() -> Vec<ErfParams> {
    let mut grid = Vec::new();
    for n_trees in [100, 300] {
        for k in [CandidateCount::Sqrt, CandidateCount::All] {
            for min_samples_split in [2, 10] {
                grid.push(ErfParams {
                    n_trees,
                    k_features: k,
                    min_samples_split,
                    max_depth: None,
                    seed: 0,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: ErfParams,
    pub mean_weighted_f1: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ErfParams,
    pub best_index: usize,
    pub cv_table: Vec<CvRow>,
}

/// Turns a raw (training, validation) split into model-ready matrices.
pub trait FoldPrep: Sync {
    fn prepare(&self, train: &LabeledMatrix, valid: &LabeledMatrix, seed: u64) -> Result<(LabeledMatrix, LabeledMatrix)>;
}

/// Oversamples the training side when enabled; validation rows pass through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmotePrep(pub Option<usize>);

impl FoldPrep for SmotePrep {
    fn prepare(&self, train: &LabeledMatrix, valid: &LabeledMatrix, seed: u64) -> Result<(LabeledMatrix, LabeledMatrix)> {
        Ok((prepare_training(train, self.0, seed)?, valid.clone()))
    }
}

/// Validation weighted F1 of one candidate on one split.
fn fold_score(
    d: &LabeledMatrix,
    fold_of: &[usize],
    fold: usize,
    p: &ErfParams,
    prep: &dyn FoldPrep,
    seed: u64,
) -> Result<f64> {
    let train_idx: Vec<usize> = (0..d.len()).filter(|&i| fold_of[i] != fold).collect();
    let valid_idx: Vec<usize> = (0..d.len()).filter(|&i| fold_of[i] == fold).collect();
    let (train, valid) = prep.prepare(&d.subset(&train_idx), &d.subset(&valid_idx), derive_seed(seed, &[1]))?;
    let params = ErfParams {
        seed: derive_seed(seed, &[2]),
        ..p.clone()
    };
    let forest = train_erf(&train, &params)?;
    let y_pred: Vec<Sex> = valid
        .x
        .iter()
        .map(|x| forest.predict(x).map(|p| p.label))
        .collect::<Result<_>>()?;
    Ok(f1_per_class(&valid.y, &y_pred)?.weighted_f1)
}

/// Scores every candidate by mean validation weighted F1 over
/// `folds x repeats` splits; the best is the earliest candidate with the
/// highest mean. The returned parameters carry their original seed.
pub fn grid_search(d: &LabeledMatrix, grid: &[ErfParams], cv: &CvOptions) -> Result<GridResult> {
    grid_search_with(d, grid, cv, &SmotePrep(cv.smote_k))
}

/// [`grid_search`] with a custom per-split preparation step (which then
/// owns oversampling; `cv.smote_k` is ignored).
pub fn grid_search_with(d: &LabeledMatrix, grid: &[ErfParams], cv: &CvOptions, prep: &dyn FoldPrep) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    if cv.repeats == 0 {
        return Err(Error::invalid("at least one cross-validation repeat is required"));
    }
    for p in grid {
        p.validate()?;
    }
    let splits: Vec<Vec<usize>> = (0..cv.repeats)
        .map(|r| stratified_group_folds(&d.y, &d.subject_ids, cv.folds, cv.group_by_subject, derive_seed(cv.seed, &[r as u64])))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..cv.repeats).flat_map(move |r| (0..cv.folds).map(move |f| (c, r, f))))
        .collect();
    let scores: Vec<f64> = tasks
        .par_iter()
        .map(|&(c, r, f)| {
            // common random numbers: every candidate sees the same split and seeds
            let seed = derive_seed(cv.seed, &[r as u64, f as u64]);
            fold_score(d, &splits[r], f, &grid[c], prep, seed)
        })
        .collect::<Result<_>>()?;
    let per = cv.repeats * cv.folds;
    let cv_table: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let fold_scores = scores[c * per..(c + 1) * per].to_vec();
            CvRow {
                params: p.clone(),
                mean_weighted_f1: fold_scores.iter().sum::<f64>() / per as f64,
                fold_scores,
            }
        })
        .collect();
    let mut best_index = 0;
    for (i, row) in cv_table.iter().enumerate() {
        if row.mean_weighted_f1 > cv_table[best_index].mean_weighted_f1 {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: grid[best_index].clone(),
        best_index,
        cv_table,
    })
}

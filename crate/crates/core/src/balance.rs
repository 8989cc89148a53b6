//! Borderline-SMOTE oversampling of the minority class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Sex;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_K: usize = 5;

/// Training rows with labels and subject identities.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Sex>,
    /// Synthetic rows carry the subject of the row they were grown from.
    pub subject_ids: Vec<String>,
    pub synthetic: Vec<bool>,
}

impl LabeledMatrix {
    pub fn new(names: Vec<String>, x: Vec<Vec<f64>>, y: Vec<Sex>, subject_ids: Vec<String>) -> Result<Self> {
        if x.len() != y.len() || x.len() != subject_ids.len() {
            return Err(Error::invalid("rows, labels and subject ids differ in length"));
        }
        if x.iter().any(|r| r.len() != names.len()) {
            return Err(Error::invalid("row width differs from the number of features"));
        }
        let n = x.len();
        Ok(LabeledMatrix {
            names,
            x,
            y,
            subject_ids,
            synthetic: vec![false; n],
        })
    }

    pub fn from_matrix(m: &FeatureMatrix) -> LabeledMatrix {
        LabeledMatrix {
            names: m.feature_names.clone(),
            x: m.rows.clone(),
            y: m.labels(),
            subject_ids: m.keys.iter().map(|k| k.subject_id.clone()).collect(),
            synthetic: vec![false; m.n_rows()],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Row counts per class, indexed by [`Sex::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for s in &self.y {
            c[s.index()] += 1;
        }
        c
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledMatrix {
        LabeledMatrix {
            names: self.names.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            synthetic: indices.iter().map(|&i| self.synthetic[i]).collect(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` rows in `pool` nearest to row `p` (excluding `p`);
/// distance ties go to the lower index.
fn nearest(x: &[Vec<f64>], p: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&i| i != p)
        .map(|&i| (sq_dist(&x[p], &x[i]), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Minority points whose k-neighbourhood is at least half but not entirely
/// majority.
pub fn danger_set(d: &LabeledMatrix, k: usize) -> Vec<usize> {
    let [nf, nm] = d.class_counts();
    let minority = if nf <= nm { Sex::F } else { Sex::M };
    let all: Vec<usize> = (0..d.len()).collect();
    (0..d.len())
        .into_par_iter()
        .filter(|&p| d.y[p] == minority)
        .filter(|&p| {
            let m = nearest(&d.x, p, &all, k).iter().filter(|&&i| d.y[i] != minority).count();
            2 * m >= k && m < k
        })
        .collect()
}

/// Oversamples the minority class until both classes have equal counts.
/// Originals come first and unchanged; synthetic rows follow.
pub fn borderline_smote(d: &LabeledMatrix, k: usize, seed: u64) -> Result<LabeledMatrix> {
    let counts = d.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    if counts[0] == counts[1] {
        return Ok(d.clone());
    }
    let minority = if counts[0] < counts[1] { Sex::F } else { Sex::M };
    let n_min = counts[minority.index()];
    let n_maj = counts[minority.other().index()];
    if k == 0 || n_min < k + 1 {
        return Err(Error::insufficient(format!(
            "insufficient minority samples: {n_min} {minority} rows, need at least {}",
            k + 1
        )));
    }
    let min_idx: Vec<usize> = (0..d.len()).filter(|&i| d.y[i] == minority).collect();
    let mut sources = danger_set(d, k);
    if sources.is_empty() {
        log::debug!("no borderline minority points; falling back to plain SMOTE");
        sources = min_idx.clone();
    }
    let neighbours: Vec<Vec<usize>> = sources.par_iter().map(|&p| nearest(&d.x, p, &min_idx, k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for s in 0..n_maj - n_min {
        let slot = s % sources.len();
        let p = sources[slot];
        let q = neighbours[slot][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let row = d.x[p].iter().zip(&d.x[q]).map(|(a, b)| a + u * (b - a)).collect();
        out.x.push(row);
        out.y.push(minority);
        out.subject_ids.push(d.subject_ids[p].clone());
        out.synthetic.push(true);
    }
    Ok(out)
}

//! Extremely randomized trees: no bootstrap, random thresholds, Gini splits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::LabeledMatrix;
use crate::corpus::Sex;
use crate::error::{Error, Result};

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Number of candidate features drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CandidateCount {
    Sqrt,
    All,
    Fixed(usize),
}

impl CandidateCount {
    pub fn resolve(self, n_features: usize) -> Result<usize> {
        let k = match self {
            CandidateCount::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            CandidateCount::All => n_features,
            CandidateCount::Fixed(k) => k,
        };
        if k == 0 || k > n_features {
            return Err(Error::invalid(format!("{k} candidate features requested, {n_features} available")));
        }
        Ok(k)
    }
}

impl fmt::Display for CandidateCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateCount::Sqrt => f.write_str("sqrt"),
            CandidateCount::All => f.write_str("all"),
            CandidateCount::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for CandidateCount {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt" => Ok(CandidateCount::Sqrt),
            "all" => Ok(CandidateCount::All),
            n => n
                .parse()
                .ok()
                .filter(|&k| k > 0)
                .map(CandidateCount::Fixed)
                .ok_or_else(|| format!("candidate count must be sqrt, all or a positive integer, got {n:?}")),
        }
    }
}

impl From<CandidateCount> for String {
    fn from(k: CandidateCount) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for CandidateCount {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErfParams {
    pub n_trees: usize,
    pub k_features: CandidateCount,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ErfParams {
    fn default() -> Self {
        ErfParams {
            n_trees: 100,
            k_features: CandidateCount::Sqrt,
            min_samples_split: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ErfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        Ok(())
    }

    /// Short label used in reports, e.g. `n300_ksqrt_m2_dnone`.
    pub fn label(&self) -> String {
        let depth = self.max_depth.map_or("none".to_string(), |d| d.to_string());
        format!("n{}_k{}_m{}_d{}", self.n_trees, self.k_features, self.min_samples_split, depth)
    }
}

/// A fitted tree as flat node arrays. `feature_index` is -1 at leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature_index: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Training class counts reaching each node, indexed by [`Sex::index`].
    pub counts: Vec<[u32; 2]>,
}

impl Tree {
    pub fn n_nodes(&self) -> usize {
        self.feature_index.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature_index[node] < 0
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, node: usize) -> usize {
            if t.is_leaf(node) {
                0
            } else {
                1 + go(t, t.left[node]).max(go(t, t.right[node]))
            }
        }
        go(self, 0)
    }

    fn leaf(&self, x: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = if x[self.feature_index[node] as usize] <= self.threshold[node] {
                self.left[node]
            } else {
                self.right[node]
            };
        }
        node
    }

    /// Majority class at the reached leaf; ties go to F.
    pub fn vote(&self, x: &[f64]) -> Sex {
        let c = self.counts[self.leaf(x)];
        if c[0] >= c[1] {
            Sex::F
        } else {
            Sex::M
        }
    }

    fn push(&mut self, counts: [u32; 2]) -> usize {
        self.feature_index.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.counts.push(counts);
        self.feature_index.len() - 1
    }
}

pub(crate) fn gini(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p, q) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p * p - q * q
}

fn class_counts(y: &[Sex], rows: &[usize]) -> [u32; 2] {
    let mut c = [0u32; 2];
    for &r in rows {
        c[y[r].index()] += 1;
    }
    c
}

/// Gini decrease of splitting `parent` into `l` and the remainder.
fn decrease(parent: [u32; 2], l: [u32; 2]) -> f64 {
    let r = [parent[0] - l[0], parent[1] - l[1]];
    let n = (parent[0] + parent[1]) as f64;
    let (nl, nr) = ((l[0] + l[1]) as f64, (r[0] + r[1]) as f64);
    gini(parent) - nl / n * gini(l) - nr / n * gini(r)
}

/// Uniform draw strictly inside (lo, hi).
fn draw_threshold(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let u: f64 = rng.random();
        let t = lo + u * (hi - lo);
        if t > lo && t < hi {
            return t;
        }
    }
}

fn grow_tree(x: &[Vec<f64>], y: &[Sex], k: usize, p: &ErfParams, rng: &mut ChaCha8Rng) -> Tree {
    let n_features = x[0].len();
    let mut tree = Tree {
        feature_index: Vec::new(),
        threshold: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        counts: Vec::new(),
    };
    let all: Vec<usize> = (0..x.len()).collect();
    let root = tree.push(class_counts(y, &all));
    let mut stack = vec![(root, all, 0usize)];
    while let Some((node, rows, depth)) = stack.pop() {
        let counts = tree.counts[node];
        let pure = counts[0] == 0 || counts[1] == 0;
        let too_deep = p.max_depth.is_some_and(|d| depth >= d);
        if pure || rows.len() < p.min_samples_split || too_deep {
            continue;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..n_features)
            .filter_map(|f| {
                let (lo, hi) = rows
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(x[r][f]), hi.max(x[r][f])));
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            continue;
        }
        let mut pool = ranges;
        let draws = k.min(pool.len());
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..draws {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
            let (f, lo, hi) = pool[i];
            let t = draw_threshold(rng, lo, hi);
            let mut l = [0u32; 2];
            for &r in &rows {
                if x[r][f] <= t {
                    l[y[r].index()] += 1;
                }
            }
            let gain = decrease(counts, l);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((f, t, gain));
            }
        }
        let (f, t, _) = best.expect("at least one candidate");
        let (lrows, rrows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r][f] <= t);
        let l = tree.push(class_counts(y, &lrows));
        let r = tree.push(class_counts(y, &rrows));
        tree.feature_index[node] = f as i64;
        tree.threshold[node] = t;
        tree.left[node] = l;
        tree.right[node] = r;
        stack.push((r, rrows, depth + 1));
        stack.push((l, lrows, depth + 1));
    }
    tree
}

/// Forest-level prediction for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Sex,
    /// Fraction of trees voting for each class, indexed by [`Sex::index`].
    pub vote_fraction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub params: ErfParams,
    pub feature_names: Vec<String>,
    pub class_labels: [Sex; 2],
    pub trees: Vec<Tree>,
}

/// Tree `i` draws from stream `i` of the ChaCha generator keyed by the
/// forest seed, so the result does not depend on scheduling.
pub fn train_erf(d: &LabeledMatrix, p: &ErfParams) -> Result<Forest> {
    p.validate()?;
    if d.is_empty() || d.n_features() == 0 {
        return Err(Error::invalid("empty training matrix"));
    }
    if d.len() < p.min_samples_split {
        return Err(Error::insufficient(format!(
            "{} training rows, min_samples_split is {}",
            d.len(),
            p.min_samples_split
        )));
    }
    let counts = d.class_counts();
    if counts.contains(&0) {
        return Err(Error::invalid("training data contains a single class"));
    }
    let k = p.k_features.resolve(d.n_features())?;
    let trees = (0..p.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(i as u64);
            grow_tree(&d.x, &d.y, k, p, &mut rng)
        })
        .collect();
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        params: p.clone(),
        feature_names: d.names.clone(),
        class_labels: Sex::ALL,
        trees,
    })
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.feature_names.len() {
            return Err(Error::invalid(format!(
                "row has {} values, forest expects {}",
                x.len(),
                self.feature_names.len()
            )));
        }
        let mut votes = [0usize; 2];
        for t in &self.trees {
            votes[t.vote(x).index()] += 1;
        }
        let n = self.trees.len() as f64;
        Ok(Prediction {
            label: if votes[0] >= votes[1] { Sex::F } else { Sex::M },
            vote_fraction: [votes[0] as f64 / n, votes[1] as f64 / n],
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn importance(&self) -> ImportanceTable {
        let m = self.feature_names.len();
        let mut total = vec![0.0; m];
        for t in &self.trees {
            let root = t.counts[0];
            let n_root = (root[0] + root[1]) as f64;
            for node in 0..t.n_nodes() {
                if t.is_leaf(node) {
                    continue;
                }
                let c = t.counts[node];
                let n = (c[0] + c[1]) as f64;
                total[t.feature_index[node] as usize] += n / n_root * decrease(c, t.counts[t.left[node]]);
            }
        }
        let n_trees = self.trees.len() as f64;
        total.iter_mut().for_each(|w| *w /= n_trees);
        let sum: f64 = total.iter().sum();
        let weights = if sum > 0.0 {
            total.iter().map(|w| w / sum).collect()
        } else {
            vec![1.0 / m as f64; m]
        };
        ImportanceTable {
            names: self.feature_names.clone(),
            weights,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let f: Forest = serde_json::from_str(s)?;
        if f.version != FOREST_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported forest format version {}", f.version)));
        }
        Ok(f)
    }
}

/// Mean impurity decrease per feature, normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
}

impl ImportanceTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.weights[i])
    }

    /// Entries sorted by decreasing weight; equal weights keep input order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.names.iter().map(String::as_str).zip(self.weights.iter().copied()).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

//! Correlation-driven hierarchical clustering of features into factors.
//!
//! Objects start as single features. The most correlated pair (by absolute
//! Pearson r) is merged while that correlation exceeds the cutoff; a merged
//! object is scored by the first principal component of the z-scored
//! original features it contains.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::numeric::{mean, pearson, std_pop};

pub const DEFAULT_CUTOFF: f64 = 0.75;

/// One cluster of features and the projection that scores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    /// Member feature names in input order.
    pub members: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Unit-norm loading vector over the standardized members.
    pub loadings: Vec<f64>,
    pub sign_anchor: String,
}

impl Factor {
    fn singleton(name: &str) -> Factor {
        Factor {
            members: vec![name.to_string()],
            means: vec![0.0],
            stds: vec![1.0],
            loadings: vec![1.0],
            sign_anchor: name.to_string(),
        }
    }

    /// The member name for singletons, otherwise the members joined by `|`.
    pub fn name(&self) -> String {
        self.members.join("|")
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    /// Score of one observation given its member values in member order.
    pub fn project(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .zip(&self.loadings)
            .map(|(((x, m), s), w)| w * (x - m) / s)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSet {
    pub cutoff: f64,
    pub factors: Vec<Factor>,
    /// Clustered inventory: every name here belongs to exactly one factor.
    #[serde(default)]
    pub feature_names: Vec<String>,
    /// Constant input columns left out of clustering.
    #[serde(default)]
    pub removed: Vec<String>,
}

impl FactorSet {
    /// Every feature its own factor.
    pub fn identity(names: &[String]) -> FactorSet {
        FactorSet {
            cutoff: DEFAULT_CUTOFF,
            factors: names.iter().map(|n| Factor::singleton(n)).collect(),
            feature_names: names.to_vec(),
            removed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.factors.iter().map(Factor::name).collect()
    }

    /// Factor scores of `rows`, whose columns are named by `names`.
    pub fn transform_rows(&self, names: &[String], rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let index: Vec<Vec<usize>> = self
            .factors
            .iter()
            .map(|f| {
                f.members
                    .iter()
                    .map(|m| {
                        names
                            .iter()
                            .position(|n| n == m)
                            .ok_or_else(|| Error::invalid(format!("missing member feature {m:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(rows
            .iter()
            .map(|row| {
                self.factors
                    .iter()
                    .zip(&index)
                    .map(|(f, idx)| {
                        let vals: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
                        f.project(&vals)
                    })
                    .collect()
            })
            .collect())
    }

    /// Factor-score matrix: one column per factor, standardized with the
    /// fitting data's statistics.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows = self.transform_rows(&x.feature_names, &x.rows)?;
        let mut out = FeatureMatrix::new(x.keys.clone(), self.names(), rows)?;
        out.dropped = x.dropped;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<FactorSet> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Pearson correlation matrix of the columns.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if columns.first().is_some_and(|c| c.len() < 2) {
        return Err(Error::insufficient("correlation needs at least 2 rows"));
    }
    let m = columns.len();
    let mut r = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let v = pearson(&columns[i], &columns[j])
                .ok_or_else(|| Error::invalid(format!("column {} is constant", if std_pop(&columns[i]) == 0.0 { i } else { j })))?;
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(r)
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations. Returns
/// eigenvalues and the matching eigenvectors (as columns of `v`).
fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// One-component PCA of the standardized columns. The first column is the
/// sign anchor: scores correlate non-negatively with it.
fn first_component(columns: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let stds: Vec<f64> = columns.iter().map(|c| std_pop(c)).collect();
    let z: Vec<Vec<f64>> = columns
        .iter()
        .zip(means.iter().zip(&stds))
        .map(|(c, (m, s))| c.iter().map(|x| (x - m) / s).collect())
        .collect();
    let n = z[0].len() as f64;
    let k = z.len();
    let mut corr = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / n;
            corr[i][j] = v;
            corr[j][i] = v;
        }
    }
    let (values, vectors) = jacobi_eigen(&corr);
    let mut best = 0;
    for i in 1..k {
        if values[i] > values[best] {
            best = i;
        }
    }
    let mut w: Vec<f64> = vectors.iter().map(|row| row[best]).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= norm);
    let scores = score_columns(&z, &w);
    if pearson(&scores, &z[0]).unwrap_or(0.0) < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
    (means, stds, w)
}

fn score_columns(z: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    (0..z[0].len())
        .map(|r| z.iter().zip(w).map(|(col, wk)| wk * col[r]).sum())
        .collect()
}

struct Object {
    /// Indices into the clustered columns, ascending.
    members: Vec<usize>,
    scores: Vec<f64>,
}

/// Clusters the matrix's features. Constant columns are removed first and
/// reported in [`FactorSet::removed`].
pub fn cluster_features(x: &FeatureMatrix, cutoff: f64) -> Result<FactorSet> {
    cluster_columns(&x.feature_names, &x.columns(), cutoff)
}

/// [`cluster_features`] over named columns.
pub fn cluster_columns(input_names: &[String], input_columns: &[Vec<f64>], cutoff: f64) -> Result<FactorSet> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::invalid(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    let n_rows = input_columns.first().map_or(0, Vec::len);
    if n_rows < 2 {
        return Err(Error::insufficient(format!("clustering needs at least 2 rows, got {n_rows}")));
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut removed = Vec::new();
    for (name, col) in input_names.iter().zip(input_columns) {
        if col.iter().all(|v| *v == col[0]) {
            warn!("constant feature {name} left out of clustering");
            removed.push(name.clone());
        } else {
            names.push(name.clone());
            columns.push(col.clone());
        }
    }

    let mut objects: Vec<Object> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| Object {
            members: vec![i],
            scores: c.clone(),
        })
        .collect();
    let abs_r = |a: &Object, b: &Object| pearson(&a.scores, &b.scores).unwrap_or(0.0).abs();
    let mut r: Vec<Vec<f64>> = (0..objects.len())
        .map(|i| (0..objects.len()).map(|j| if i < j { abs_r(&objects[i], &objects[j]) } else { 0.0 }).collect())
        .collect();

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..objects.len() {
            for j in i + 1..objects.len() {
                if best.is_none_or(|b| r[i][j] > b.2) {
                    best = Some((i, j, r[i][j]));
                }
            }
        }
        let Some((i, j, value)) = best.filter(|b| b.2 > cutoff) else {
            break;
        };
        log::debug!("merging objects {i} and {j} at |r| = {value}");
        let mut members = objects[i].members.clone();
        members.extend(&objects[j].members);
        members.sort_unstable();
        let cols: Vec<&Vec<f64>> = members.iter().map(|&m| &columns[m]).collect();
        let (means, stds, w) = first_component(&cols);
        let z: Vec<Vec<f64>> = cols
            .iter()
            .zip(means.iter().zip(&stds))
            .map(|(c, (m, s))| c.iter().map(|x| (x - m) / s).collect())
            .collect();
        objects[i] = Object {
            members,
            scores: score_columns(&z, &w),
        };
        objects.remove(j);
        r.remove(j);
        for row in r.iter_mut() {
            row.remove(j);
        }
        for k in 0..objects.len() {
            if k != i {
                let (a, b) = (k.min(i), k.max(i));
                r[a][b] = abs_r(&objects[a], &objects[b]);
            }
        }
    }

    let factors = objects
        .iter()
        .map(|o| {
            if o.members.len() == 1 {
                return Factor::singleton(&names[o.members[0]]);
            }
            let cols: Vec<&Vec<f64>> = o.members.iter().map(|&m| &columns[m]).collect();
            let (means, stds, loadings) = first_component(&cols);
            Factor {
                members: o.members.iter().map(|&m| names[m].clone()).collect(),
                means,
                stds,
                loadings,
                sign_anchor: names[o.members[0]].clone(),
            }
        })
        .collect();
    Ok(FactorSet {
        cutoff,
        factors,
        feature_names: names,
        removed,
    })
}

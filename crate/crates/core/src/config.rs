//! Run configuration: a flat TOML file of `key = value` lines.
//!
//! | key | type | default |
//! |---|---|---|
//! | `manifest` | path | none |
//! | `features` | path (feature CSV) | none |
//! | `output_dir` | path | `out` |
//! | `segment_seconds` | float | 5.0 |
//! | `feature_sets` | list of `af`, `eg`, `eg_vtl` | all three |
//! | `groupings` | list of `per_year`, `per_band` | both |
//! | `speech_types` | list of `scripted`, `spontaneous`, `both` | all three |
//! | `clustering` | list of `BC`, `AC` | both |
//! | `cutoff` | float in (0, 1) | 0.75 |
//! | `cluster_scope` | `training_folds` or `cohort` | `training_folds` |
//! | `smote` | bool | true |
//! | `smote_k` | integer | 5 |
//! | `smote_stage` | `after_transform` or `before_transform` | `after_transform` |
//! | `grid_n_trees` | list of integers | [100, 300] |
//! | `grid_k_features` | list of `sqrt`, `all` or integers (as strings) | ["sqrt", "all"] |
//! | `grid_min_samples_split` | list of integers | [2, 10] |
//! | `grid_max_depth` | list of integers, 0 = unlimited | [0] |
//! | `folds` | integer | 5 |
//! | `repeats` | integer | 5 |
//! | `outer_folds` | integer | 5 |
//! | `group_by_subject` | bool | true |
//! | `min_subjects_per_class` | integer | 10 |
//! | `stats_ages` | list of integers, empty = all | [] |
//! | `seed` | integer | 0 |
//! | `jobs` | integer, 0 = all cores | 0 |
//! | `strict` | bool | false |
//! | `dsp_<field>` | any [`DspConfig`] field | see [`DspConfig`] |
//!
//! Relative paths are resolved against the configuration file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dsp::DspConfig;
use crate::error::{Error, Result};
use crate::eval::{ClusterScope, Clustering, ExperimentConfig, SmoteStage, SpeechSelection};
use crate::features::FeatureSet;
use crate::model::{CandidateCount, ErfParams};
use crate::corpus::GroupingMode;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    manifest: Option<PathBuf>,
    features: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    segment_seconds: Option<f64>,
    feature_sets: Option<Vec<String>>,
    groupings: Option<Vec<String>>,
    speech_types: Option<Vec<String>>,
    clustering: Option<Vec<String>>,
    cutoff: Option<f64>,
    cluster_scope: Option<String>,
    smote: Option<bool>,
    smote_k: Option<usize>,
    smote_stage: Option<String>,
    grid_n_trees: Option<Vec<usize>>,
    grid_k_features: Option<Vec<String>>,
    grid_min_samples_split: Option<Vec<usize>>,
    grid_max_depth: Option<Vec<usize>>,
    folds: Option<usize>,
    repeats: Option<usize>,
    outer_folds: Option<usize>,
    group_by_subject: Option<bool>,
    min_subjects_per_class: Option<usize>,
    stats_ages: Option<Vec<u8>>,
    seed: Option<u64>,
    jobs: Option<usize>,
    strict: Option<bool>,
    dsp_sample_rate: Option<u32>,
    dsp_frame_length: Option<f64>,
    dsp_frame_hop: Option<f64>,
    dsp_f0_min: Option<f64>,
    dsp_f0_max: Option<f64>,
    dsp_voicing_threshold: Option<f64>,
    dsp_silence_ratio: Option<f64>,
    dsp_lpc_order: Option<usize>,
    dsp_preemphasis: Option<f64>,
    dsp_formant_min: Option<f64>,
    dsp_formant_max: Option<f64>,
    dsp_max_formant_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub segment_seconds: f64,
    pub dsp: DspConfig,
    pub experiment: ExperimentConfig,
    pub jobs: usize,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            features: None,
            output_dir: PathBuf::from("out"),
            segment_seconds: 5.0,
            dsp: DspConfig::default(),
            experiment: ExperimentConfig::default(),
            jobs: 0,
            strict: false,
        }
    }
}

fn parse_list<T: std::str::FromStr<Err = String>>(key: &str, values: &[String]) -> Result<Vec<T>> {
    values
        .iter()
        .map(|v| v.parse().map_err(|e| Error::invalid(format!("{key}: {e}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr<Err = String>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e| Error::invalid(format!("{key}: {e}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    /// Parses configuration text; relative paths are joined onto `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let mut c = RunConfig::default();
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        c.manifest = raw.manifest.map(resolve);
        c.features = raw.features.map(resolve);
        if let Some(p) = raw.output_dir {
            c.output_dir = resolve(p);
        }
        if let Some(v) = raw.segment_seconds {
            c.segment_seconds = v;
        }
        let e = &mut c.experiment;
        if let Some(v) = &raw.feature_sets {
            e.feature_sets = parse_list::<FeatureSet>("feature_sets", v)?;
        }
        if let Some(v) = &raw.groupings {
            e.groupings = parse_list::<GroupingMode>("groupings", v)?;
        }
        if let Some(v) = &raw.speech_types {
            e.speech_types = parse_list::<SpeechSelection>("speech_types", v)?;
        }
        if let Some(v) = &raw.clustering {
            e.clustering = parse_list::<Clustering>("clustering", v)?;
        }
        if let Some(v) = raw.cutoff {
            e.cutoff = v;
        }
        if let Some(v) = &raw.cluster_scope {
            e.cluster_scope = parse_one::<ClusterScope>("cluster_scope", v)?;
        }
        let k = raw.smote_k.unwrap_or(crate::balance::DEFAULT_K);
        e.smote_k = if raw.smote.unwrap_or(true) { Some(k) } else { None };
        if let Some(v) = &raw.smote_stage {
            e.smote_stage = parse_one::<SmoteStage>("smote_stage", v)?;
        }
        if raw.grid_n_trees.is_some()
            || raw.grid_k_features.is_some()
            || raw.grid_min_samples_split.is_some()
            || raw.grid_max_depth.is_some()
        {
            let n_trees = raw.grid_n_trees.clone().unwrap_or_else(|| vec![100, 300]);
            let ks = match &raw.grid_k_features {
                Some(v) => parse_list::<CandidateCount>("grid_k_features", v)?,
                None => vec![CandidateCount::Sqrt, CandidateCount::All],
            };
            let splits = raw.grid_min_samples_split.clone().unwrap_or_else(|| vec![2, 10]);
            let depths = raw.grid_max_depth.clone().unwrap_or_else(|| vec![0]);
            e.grid = Vec::new();
            for &n in &n_trees {
                for &k in &ks {
                    for &m in &splits {
                        for &d in &depths {
                            e.grid.push(ErfParams {
                                n_trees: n,
                                k_features: k,
                                min_samples_split: m,
                                max_depth: (d > 0).then_some(d),
                                seed: 0,
                            });
                        }
                    }
                }
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = raw.$field { e.$field = v; })* };
        }
        set!(folds, repeats, outer_folds, group_by_subject, min_subjects_per_class, seed);
        if let Some(v) = raw.stats_ages.clone() {
            e.stats_ages = v;
        }
        let d = &mut c.dsp;
        macro_rules! dsp {
            ($($raw:ident => $field:ident),*) => { $(if let Some(v) = raw.$raw { d.$field = v; })* };
        }
        dsp!(
            dsp_sample_rate => sample_rate,
            dsp_frame_length => frame_length,
            dsp_frame_hop => frame_hop,
            dsp_f0_min => f0_min,
            dsp_f0_max => f0_max,
            dsp_voicing_threshold => voicing_threshold,
            dsp_silence_ratio => silence_ratio,
            dsp_lpc_order => lpc_order,
            dsp_preemphasis => preemphasis,
            dsp_formant_min => formant_min,
            dsp_formant_max => formant_max,
            dsp_max_formant_bandwidth => max_formant_bandwidth
        );
        if let Some(v) = raw.jobs {
            c.jobs = v;
        }
        if let Some(v) = raw.strict {
            c.strict = v;
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks value ranges and that input paths exist.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: String| Err(Error::invalid(m));
        if !(e.cutoff > 0.0 && e.cutoff < 1.0) {
            return bad(format!("cutoff must lie in (0, 1), got {}", e.cutoff));
        }
        if e.folds < 2 || e.outer_folds < 2 {
            return bad("folds and outer_folds must be at least 2".into());
        }
        if e.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if e.grid.is_empty() {
            return bad("hyperparameter grid is empty".into());
        }
        for p in &e.grid {
            p.validate()?;
        }
        if e.smote_k == Some(0) {
            return bad("smote_k must be at least 1".into());
        }
        if e.feature_sets.is_empty() || e.groupings.is_empty() || e.speech_types.is_empty() || e.clustering.is_empty() {
            return bad("feature_sets, groupings, speech_types and clustering must be non-empty".into());
        }
        if !(self.segment_seconds > 0.0) {
            return bad(format!("segment_seconds must be positive, got {}", self.segment_seconds));
        }
        let d = &self.dsp;
        if d.sample_rate == 0 || !(d.frame_length > 0.0) || !(d.frame_hop > 0.0) || !(d.f0_min > 0.0 && d.f0_min < d.f0_max) {
            return bad("dsp parameters out of range".into());
        }
        for (key, p) in [("manifest", &self.manifest), ("features", &self.features)] {
            if let Some(p) = p {
                if !p.exists() {
                    return bad(format!("{key}: {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }
}

//! Segment-level feature vectors aggregated from frame descriptors.

mod inventory;
mod io;
mod vtl;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_wav, samples_from_recording, Aged, ManifestEntry, Payload, Sample, Sex, SpeechType};
use crate::dsp::{analyze, DspConfig, FrameSeries, SegmentDescriptors};
use crate::error::{Error, Result};
use crate::numeric::{mean, quantile, std_pop};

pub use inventory::{
    canonical_name, inventory, inventory_file, inventory_index, FeatureSet, CLASSIC, CLASSIC_ONLY, FUNCTIONAL,
    INVENTORY_VERSION, VTL,
};
pub use io::{read_feature_csv, write_feature_csv, FEATURE_CSV_KEYS};
pub use vtl::{check_formants, formant_position, vtl_vector, FormantPopulation, VtlEstimates, SPEED_OF_SOUND_CM};

/// Rows per class below which a matrix is rejected.
pub const MIN_ROWS_PER_CLASS: usize = 10;

/// Named feature values in canonical order. `None` marks a missing value;
/// present values are always finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    entries: Vec<(&'static str, Option<f64>)>,
}

impl FeatureVector {
    /// Vector over `names` with every value missing.
    pub fn missing(names: &[&'static str]) -> Self {
        FeatureVector {
            entries: names.iter().map(|n| (*n, None)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).and_then(|e| e.1)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.0 == name)
    }

    /// Sets an existing entry; non-finite values are stored as missing.
    pub fn set(&mut self, name: &str, value: Option<f64>) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == name) {
            e.1 = value.filter(|v| v.is_finite());
        }
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.1.is_some())
    }

    pub fn all_missing(&self) -> bool {
        self.entries.iter().all(|e| e.1.is_none())
    }

    /// Sub-vector over `names`; names absent here come back missing.
    pub fn select(&self, names: &[&'static str]) -> FeatureVector {
        FeatureVector {
            entries: names.iter().map(|n| (*n, self.get(n))).collect(),
        }
    }
}

/// Identity of one sample within the corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub subject_id: String,
    pub age: u8,
    pub sex: Sex,
    pub speech_type: SpeechType,
    pub segment_index: usize,
}

/// One row of the feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub key: SampleKey,
    pub features: FeatureVector,
}

impl Aged for FeatureRow {
    fn age(&self) -> u8 {
        self.key.age
    }
}

/// Rectangular, complete numeric matrix with row identities.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub keys: Vec<SampleKey>,
    pub feature_names: Vec<String>,
    /// Row-major values, `rows[i][j]` for sample i and feature j.
    pub rows: Vec<Vec<f64>>,
    /// Rows removed because of missing values.
    pub dropped: usize,
}

impl FeatureMatrix {
    pub fn new(keys: Vec<SampleKey>, feature_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if keys.len() != rows.len() || rows.iter().any(|r| r.len() != feature_names.len()) {
            return Err(Error::invalid("feature matrix is not rectangular"));
        }
        Ok(FeatureMatrix {
            keys,
            feature_names,
            rows,
            dropped: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols()).map(|j| self.column(j)).collect()
    }

    pub fn labels(&self) -> Vec<Sex> {
        self.keys.iter().map(|k| k.sex).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            keys: indices.iter().map(|&i| self.keys[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            dropped: 0,
        }
    }

    /// Rows in canonical order as feature CSV rows.
    pub fn to_rows(&self) -> Result<Vec<FeatureRow>> {
        let names: Vec<&'static str> = self
            .feature_names
            .iter()
            .map(|n| canonical_name(n).ok_or_else(|| Error::invalid(format!("unknown feature {n:?}"))))
            .collect::<Result<_>>()?;
        Ok(self
            .keys
            .iter()
            .zip(&self.rows)
            .map(|(k, r)| {
                let mut fv = FeatureVector::missing(&names);
                for (n, v) in names.iter().zip(r) {
                    fv.set(n, Some(*v));
                }
                FeatureRow {
                    key: k.clone(),
                    features: fv,
                }
            })
            .collect())
    }
}

fn mean_of(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| mean(xs))
}

fn std_of(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| std_pop(xs))
}

/// Mean formant quadruple, when all four are defined and ordered.
fn formant_means(d: &SegmentDescriptors) -> Option<[f64; 4]> {
    let f = [0, 1, 2, 3].map(|n| mean_of(&d.formants.frequencies(n)));
    let f = [f[0]?, f[1]?, f[2]?, f[3]?];
    check_formants(&f).ok().map(|_| f)
}

/// Full-inventory vector of one segment. pF is left missing: it needs the
/// cohort and is filled by [`fill_formant_position`].
pub fn extract_vector(d: &SegmentDescriptors) -> FeatureVector {
    let mut v = FeatureVector::missing(inventory());
    if d.pitch.voiced_count() == 0 {
        return v;
    }
    let mut put = |name: &str, value: Option<f64>| v.set(name, value);

    let f0 = d.pitch.defined();
    put("F0_mean", mean_of(&f0));
    put("F0_std", std_of(&f0));
    for (name, q) in [("F0_p20", 0.2), ("F0_p50", 0.5), ("F0_p80", 0.8)] {
        put(name, (!f0.is_empty()).then(|| quantile(&f0, q)));
    }
    let loud = d.loudness.defined();
    put("loudness_mean", mean_of(&loud));
    put("loudness_std", std_of(&loud));
    for (name, q) in [("loudness_p20", 0.2), ("loudness_p50", 0.5), ("loudness_p80", 0.8)] {
        put(name, (!loud.is_empty()).then(|| quantile(&loud, q)));
    }

    let s = &d.spectral;
    let with_voicing: [(&str, &FrameSeries); 4] = [
        ("flux", &s.flux),
        ("alpha_ratio", &s.alpha_ratio),
        ("hammarberg", &s.hammarberg),
        ("slope_0_500", &s.slope_0_500),
    ];
    for (stem, series) in with_voicing {
        let all = series.defined();
        put(&format!("{stem}_mean"), mean_of(&all));
        put(&format!("{stem}_std"), std_of(&all));
        put(&format!("{stem}_V_mean"), mean_of(&series.defined_where(true)));
        put(&format!("{stem}_UV_mean"), mean_of(&series.defined_where(false)));
    }
    for (stem, series) in [("slope_500_1500", &s.slope_500_1500), ("H1_H2", &s.h1_h2), ("H1_A3", &s.h1_a3)] {
        let all = series.defined();
        put(&format!("{stem}_mean"), mean_of(&all));
        put(&format!("{stem}_std"), std_of(&all));
    }
    for (i, series) in s.mfcc.iter().enumerate() {
        let all = series.defined();
        put(&format!("mfcc{}_mean", i + 1), mean_of(&all));
        put(&format!("mfcc{}_std", i + 1), std_of(&all));
        put(&format!("mfcc{}_V_mean", i + 1), mean_of(&series.defined_where(true)));
    }
    for n in 0..4 {
        let freqs = d.formants.frequencies(n);
        put(&format!("F{}_mean", n + 1), mean_of(&freqs));
        if n < 3 {
            let bws = d.formants.bandwidths(n);
            put(&format!("F{}_std", n + 1), std_of(&freqs));
            put(&format!("F{}_bw_mean", n + 1), mean_of(&bws));
            put(&format!("F{}_bw_std", n + 1), std_of(&bws));
        }
    }

    put("jitter_local", d.jitter.local);
    put("jitter_local_abs", d.jitter.local_abs);
    put("jitter_rap", d.jitter.rap);
    put("jitter_ppq5", d.jitter.ppq5);
    put("jitter_ddp", d.jitter.ddp);
    put("shimmer_local", d.shimmer.local);
    put("shimmer_apq3", d.shimmer.apq3);
    put("shimmer_apq5", d.shimmer.apq5);
    put("shimmer_apq11", d.shimmer.apq11);
    put("shimmer_dda", d.shimmer.dda);
    put("HNR", d.hnr);

    let t = &d.voicing;
    put("loudness_peak_rate", Some(t.loudness_peak_rate));
    put("voiced_segments_per_sec", Some(t.voiced_segments_per_sec));
    put("voiced_len_mean", Some(t.voiced_len_mean));
    put("voiced_len_std", Some(t.voiced_len_std));
    put("UVL_mean", Some(t.uvl_mean));
    put("UVL_std", Some(t.uvl_std));

    if let Some(f) = formant_means(d) {
        if let Ok(e) = vtl_vector(&f, None) {
            put("fdisp", Some(e.fdisp));
            put("avgF", Some(e.avg_f));
            put("mff", Some(e.mff));
            put("fitch_vtl", Some(e.fitch_vtl));
            put("delta_f", Some(e.delta_f));
        }
    }
    v
}

/// Feature row of one sample. Audio payloads are analyzed; precomputed
/// payloads are re-ordered onto the inventory. `None` when the sample has
/// no voiced frames.
pub fn sample_row(sample: &Sample, dsp: &DspConfig) -> Result<Option<FeatureRow>> {
    let features = match &sample.payload {
        Payload::Audio(audio) => extract_vector(&analyze(audio, dsp)?),
        Payload::Features(v) => {
            let mut full = FeatureVector::missing(inventory());
            for (n, x) in v.iter() {
                full.set(n, x);
            }
            full
        }
    };
    if features.all_missing() {
        return Ok(None);
    }
    Ok(Some(FeatureRow {
        key: SampleKey {
            subject_id: sample.subject_id.clone(),
            age: sample.age,
            sex: sample.sex,
            speech_type: sample.speech_type,
            segment_index: sample.segment_index,
        },
        features,
    }))
}

/// A recording or segment that produced no feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionIssue {
    pub subject_id: String,
    pub audio_path: std::path::PathBuf,
    pub message: String,
}

/// Outcome of extracting a whole manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub rows: Vec<FeatureRow>,
    pub skipped: Vec<ExtractionIssue>,
}

/// Reads, segments and analyzes every manifest entry (in parallel, output
/// in manifest order) and fills pF per age-year cohort. Unreadable audio is
/// skipped and reported, or is fatal when `strict` is set.
pub fn extract_manifest(entries: &[ManifestEntry], dsp: &DspConfig, window_seconds: f64, strict: bool) -> Result<Extraction> {
    use rayon::prelude::*;
    let per_entry: Vec<Result<Vec<FeatureRow>>> = entries
        .par_iter()
        .map(|e| {
            let audio = read_wav(&e.audio_path)?;
            let mut rows = Vec::new();
            for sample in samples_from_recording(e, audio, window_seconds)? {
                match sample_row(&sample, dsp) {
                    Ok(Some(r)) => rows.push(r),
                    Ok(None) => log::warn!(
                        "{} segment {}: no voiced frames, sample dropped",
                        e.audio_path.display(),
                        sample.segment_index
                    ),
                    Err(err) => log::warn!("{} segment {}: {err}", e.audio_path.display(), sample.segment_index),
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (e, result) in entries.iter().zip(per_entry) {
        match result {
            Ok(r) => {
                log::info!("{}: {} samples", e.audio_path.display(), r.len());
                rows.extend(r);
            }
            Err(err) if strict => return Err(err),
            Err(err) => {
                log::warn!("skipping {}: {err}", e.audio_path.display());
                skipped.push(ExtractionIssue {
                    subject_id: e.subject_id.clone(),
                    audio_path: e.audio_path.clone(),
                    message: err.to_string(),
                });
            }
        }
    }
    fill_formant_position(&mut rows);
    Ok(Extraction { rows, skipped })
}

/// The classic 23-feature vector.
pub fn af_vector(d: &SegmentDescriptors) -> FeatureVector {
    extract_vector(d).select(&FeatureSet::Af.names())
}

/// The functional (eGeMAPS-style) vector.
pub fn functional_vector(d: &SegmentDescriptors) -> FeatureVector {
    extract_vector(d).select(&FeatureSet::Eg.names())
}

fn formants_of(v: &FeatureVector) -> Option<[f64; 4]> {
    let f = [v.get("F1_mean")?, v.get("F2_mean")?, v.get("F3_mean")?, v.get("F4_mean")?];
    check_formants(&f).ok().map(|_| f)
}

/// Computes pF for every row, standardizing against the rows of the same
/// age-year. Rows without a valid formant quadruple, or in cohorts where
/// any formant has zero spread, get a missing pF.
pub fn fill_formant_position(rows: &mut [FeatureRow]) {
    let mut cohorts: BTreeMap<u8, Vec<[f64; 4]>> = BTreeMap::new();
    for r in rows.iter() {
        if let Some(f) = formants_of(&r.features) {
            cohorts.entry(r.key.age).or_default().push(f);
        }
    }
    let pops: BTreeMap<u8, FormantPopulation> = cohorts
        .iter()
        .filter_map(|(age, fs)| Some((*age, FormantPopulation::from_samples(fs)?)))
        .collect();
    for r in rows.iter_mut() {
        let p_f = formants_of(&r.features)
            .zip(pops.get(&r.key.age))
            .and_then(|(f, pop)| formant_position(&f, pop).ok());
        r.features.set("pF", p_f);
    }
}

/// Matrix over `set` without the per-class size check. pF is recomputed
/// within each age-year cohort of `rows`; rows missing any member feature
/// are dropped and counted.
pub fn select_features(rows: &[FeatureRow], set: FeatureSet) -> FeatureMatrix {
    let names = set.names();
    let mut rows = rows.to_vec();
    if names.contains(&"pF") {
        fill_formant_position(&mut rows);
    }
    let mut keys = Vec::new();
    let mut data = Vec::new();
    let mut dropped = 0;
    for r in &rows {
        let values: Option<Vec<f64>> = names.iter().map(|n| r.features.get(n)).collect();
        match values {
            Some(v) => {
                keys.push(r.key.clone());
                data.push(v);
            }
            None => dropped += 1,
        }
    }
    FeatureMatrix {
        keys,
        feature_names: names.iter().map(|s| s.to_string()).collect(),
        rows: data,
        dropped,
    }
}

/// [`select_features`] followed by the minimum-size check: at least
/// [`MIN_ROWS_PER_CLASS`] surviving rows per class.
pub fn assemble_matrix(rows: &[FeatureRow], set: FeatureSet) -> Result<FeatureMatrix> {
    let m = select_features(rows, set);
    let counts = Sex::ALL.map(|s| m.keys.iter().filter(|k| k.sex == s).count());
    if counts.iter().any(|&c| c < MIN_ROWS_PER_CLASS) {
        return Err(Error::insufficient(format!(
            "{} rows for F and {} for M after dropping {} incomplete rows (need {MIN_ROWS_PER_CLASS} per class)",
            counts[0], counts[1], m.dropped
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::synth;

    fn descriptors(audio: &crate::corpus::PcmBuffer) -> SegmentDescriptors {
        analyze(audio, &DspConfig::default()).unwrap()
    }

    fn key(id: &str, age: u8, sex: Sex) -> SampleKey {
        SampleKey {
            subject_id: id.into(),
            age,
            sex,
            speech_type: SpeechType::Scripted,
            segment_index: 0,
        }
    }

    #[test]
    fn steady_vowel_af_vector() {
        let d = descriptors(&synth::vowel(
            200.0,
            &[(700.0, 90.0), (1400.0, 100.0), (2800.0, 150.0), (3900.0, 200.0)],
            1.0,
        ));
        let v = af_vector(&d);
        assert_eq!(v.len(), 23);
        assert!(v.get("F0_std").unwrap() < 2.0);
        assert!((v.get("F0_mean").unwrap() - 200.0).abs() < 2.0);
    }

    #[test]
    fn unvoiced_sample_is_all_missing() {
        let d = descriptors(&synth::silence(0.5));
        assert!(af_vector(&d).all_missing());
        assert!(extract_vector(&d).all_missing());
    }

    #[test]
    fn f0_percentiles_use_voiced_frames_only() {
        // half sine, half silence: unvoiced frames must not pull percentiles down
        let mut audio = synth::sine(250.0, 0.5, 0.5);
        audio.samples.extend(synth::silence(0.5).samples);
        let v = functional_vector(&descriptors(&audio));
        let p20 = v.get("F0_p20").unwrap();
        assert!((p20 - 250.0).abs() < 3.0, "p20 {p20}");
    }

    #[test]
    fn quantiles_of_constant_contour() {
        let d = descriptors(&synth::sine(200.0, 0.5, 0.5));
        let v = functional_vector(&d);
        let (m, p20, p50, p80) = (
            v.get("loudness_mean").unwrap(),
            v.get("loudness_p20").unwrap(),
            v.get("loudness_p50").unwrap(),
            v.get("loudness_p80").unwrap(),
        );
        // 200 Hz at 10 ms hop: every frame sees the same waveform
        assert!((m - p20).abs() < 1e-9 * m && (m - p50).abs() < 1e-9 * m && (m - p80).abs() < 1e-9 * m);
        assert!(v.get("loudness_std").unwrap() < 1e-9 * m);
        assert!(p20 <= p50 && p50 <= p80);
    }

    #[test]
    fn amplitude_scale_invariance() {
        let base = synth::vowel(
            230.0,
            &[(750.0, 90.0), (1500.0, 110.0), (2900.0, 160.0), (4000.0, 220.0)],
            0.6,
        );
        let a = extract_vector(&descriptors(&base));
        let b = extract_vector(&descriptors(&synth::scaled(&base, 0.37)));
        let invariant = [
            "F0_mean", "jitter_local", "jitter_rap", "shimmer_local", "shimmer_apq3", "HNR", "F1_mean", "F2_mean",
            "F3_mean", "F4_mean", "alpha_ratio_mean", "hammarberg_mean", "slope_0_500_mean", "slope_500_1500_mean",
            "H1_H2_mean", "H1_A3_mean",
        ];
        for n in invariant {
            let (x, y) = (a.get(n).unwrap(), b.get(n).unwrap());
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-12), "{n}: {x} vs {y}");
        }
        assert!(b.get("loudness_mean").unwrap() < a.get("loudness_mean").unwrap());
    }

    #[test]
    fn time_shift_invariance() {
        let base = synth::vowel(
            210.0,
            &[(700.0, 90.0), (1400.0, 100.0), (2800.0, 150.0), (3900.0, 200.0)],
            0.6,
        );
        let mut shifted = synth::silence(0.010);
        shifted.samples.extend(&base.samples);
        let a = extract_vector(&descriptors(&base));
        let b = extract_vector(&descriptors(&shifted));
        for n in ["F0_mean", "HNR", "F1_mean", "F2_mean", "H1_H2_mean", "alpha_ratio_V_mean"] {
            let (x, y) = (a.get(n).unwrap(), b.get(n).unwrap());
            // the first shifted frame straddles the onset, so agreement is close but not exact
            assert!((x - y).abs() <= 0.02 * x.abs(), "{n}: {x} vs {y}");
        }
    }

    fn row(id: &str, age: u8, sex: Sex, f: [f64; 4]) -> FeatureRow {
        let mut fv = FeatureVector::missing(inventory());
        for n in inventory() {
            fv.set(n, Some(1.0));
        }
        for (i, x) in f.iter().enumerate() {
            fv.set(&format!("F{}_mean", i + 1), Some(*x));
        }
        FeatureRow {
            key: key(id, age, sex),
            features: fv,
        }
    }

    #[test]
    fn column_counts_per_set() {
        let rows: Vec<FeatureRow> = (0..24)
            .map(|i| {
                let sex = if i % 2 == 0 { Sex::F } else { Sex::M };
                let d = i as f64;
                row(&format!("s{i}"), 9, sex, [500.0 + d, 1500.0 + 2.0 * d, 2500.0 - d, 3500.0 + d])
            })
            .collect();
        assert_eq!(assemble_matrix(&rows, FeatureSet::Af).unwrap().n_cols(), 23);
        let eg = assemble_matrix(&rows, FeatureSet::Eg).unwrap().n_cols();
        assert_eq!(assemble_matrix(&rows, FeatureSet::EgVtl).unwrap().n_cols(), eg + 6);
    }

    #[test]
    fn identical_samples_give_identical_rows() {
        let mut rows: Vec<FeatureRow> = (0..20)
            .map(|i| {
                let sex = if i < 10 { Sex::F } else { Sex::M };
                let d = i as f64;
                row(&format!("s{i}"), 9, sex, [500.0 + d, 1500.0 + d, 2500.0 + d, 3500.0 + d])
            })
            .collect();
        rows.push(rows[0].clone());
        let m = assemble_matrix(&rows, FeatureSet::EgVtl).unwrap();
        assert_eq!(m.rows[0], m.rows[20]);
    }

    #[test]
    fn insufficient_rows_is_an_error() {
        let rows: Vec<FeatureRow> = (0..12)
            .map(|i| row(&format!("s{i}"), 9, if i < 3 { Sex::F } else { Sex::M }, [500.0, 1500.0, 2500.0, 3500.0]))
            .collect();
        assert!(matches!(assemble_matrix(&rows, FeatureSet::Af), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn missing_rows_are_dropped_and_counted() {
        let mut rows: Vec<FeatureRow> = (0..4)
            .map(|i| {
                let d = i as f64;
                row(&format!("s{i}"), 9, Sex::F, [500.0 + d, 1500.0 + d, 2500.0 + d, 3500.0 + d])
            })
            .collect();
        rows[1].features.set("HNR", None);
        let m = select_features(&rows, FeatureSet::Af);
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.dropped, 1);
    }

    #[test]
    fn formant_position_is_cohort_relative() {
        let mut rows = vec![
            row("a", 7, Sex::F, [500.0, 1500.0, 2500.0, 3500.0]),
            row("b", 7, Sex::M, [600.0, 1600.0, 2600.0, 3600.0]),
            row("c", 8, Sex::M, [900.0, 1900.0, 2900.0, 3900.0]),
        ];
        fill_formant_position(&mut rows);
        assert_eq!(rows[0].features.get("pF"), Some(-1.0));
        assert_eq!(rows[1].features.get("pF"), Some(1.0));
        // singleton cohort has zero spread
        assert_eq!(rows[2].features.get("pF"), None);
    }
}

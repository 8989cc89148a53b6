//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use childvoice::corpus::{write_wav, PcmBuffer, Sex, SpeechType};
use childvoice::features::{inventory, vtl_vector, FeatureRow, FeatureVector, SampleKey};

pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Features that carry the class shift in [`synthetic_rows`].
pub const INFORMATIVE: [&str; 8] = [
    "F0_mean",
    "F1_mean",
    "F2_mean",
    "F3_mean",
    "F4_mean",
    "HNR",
    "mfcc1_mean",
    "jitter_local",
];

#[derive(Debug, Clone, Copy)]
pub struct Cohort {
    pub age: u8,
    pub girls: usize,
    pub boys: usize,
    pub segments: usize,
    /// Euclidean distance between the class centroids, in within-class
    /// standard deviations, spread evenly over [`INFORMATIVE`].
    pub distance: f64,
}

impl Cohort {
    pub fn new(age: u8, per_class: usize, distance: f64) -> Self {
        Cohort {
            age,
            girls: per_class,
            boys: per_class,
            segments: 3,
            distance,
        }
    }
}

const FORMANT_BASE: [(f64, f64); 4] = [(700.0, 50.0), (2000.0, 120.0), (3000.0, 150.0), (4200.0, 200.0)];

/// Complete feature rows: every inventory feature is unit-variance noise
/// around a fixed base, except that girls and boys are shifted apart along
/// [`INFORMATIVE`]. VTL estimators are derived from the formants and pF is
/// left for the pipeline to fill.
pub fn synthetic_rows(cohorts: &[Cohort], seed: u64) -> Vec<FeatureRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for c in cohorts {
        let per_feature = c.distance / (INFORMATIVE.len() as f64).sqrt();
        let subjects = (0..c.girls).map(|i| (Sex::F, i)).chain((0..c.boys).map(|i| (Sex::M, i)));
        for (sex, i) in subjects {
            let sign = if sex == Sex::F { 0.5 } else { -0.5 };
            let id = format!("{sex}{:02}_{i:03}", c.age);
            let offsets: Vec<f64> = inventory().iter().map(|_| 0.3 * normal(&mut rng)).collect();
            for seg in 0..c.segments {
                let mut v = FeatureVector::missing(inventory());
                let z = |j: usize, name: &str, rng: &mut ChaCha8Rng| {
                    let shift = if INFORMATIVE.contains(&name) { sign * per_feature } else { 0.0 };
                    offsets[j] + 0.95 * normal(rng) + shift
                };
                let mut formants = [0.0; 4];
                for (j, name) in inventory().iter().enumerate() {
                    if ["fdisp", "avgF", "mff", "fitch_vtl", "delta_f", "pF"].contains(name) {
                        continue;
                    }
                    let zj = z(j, name, &mut rng);
                    let value = match *name {
                        "F1_mean" => 0,
                        "F2_mean" => 1,
                        "F3_mean" => 2,
                        "F4_mean" => 3,
                        _ => 4,
                    };
                    let x = if value < 4 {
                        let (base, sd) = FORMANT_BASE[value];
                        formants[value] = base + sd * zj;
                        formants[value]
                    } else {
                        10.0 + zj
                    };
                    v.set(name, Some(x));
                }
                let vtl = vtl_vector(&formants, None).expect("ordered formants");
                v.set("fdisp", Some(vtl.fdisp));
                v.set("avgF", Some(vtl.avg_f));
                v.set("mff", Some(vtl.mff));
                v.set("fitch_vtl", Some(vtl.fitch_vtl));
                v.set("delta_f", Some(vtl.delta_f));
                rows.push(FeatureRow {
                    key: SampleKey {
                        subject_id: id.clone(),
                        age: c.age,
                        sex,
                        speech_type: if seg == 0 { SpeechType::Scripted } else { SpeechType::Spontaneous },
                        segment_index: seg,
                    },
                    features: v,
                });
            }
        }
    }
    rows
}

/// Relabels every subject with an independent fair coin, leaving features alone.
pub fn shuffle_labels(rows: &mut [FeatureRow], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned = std::collections::BTreeMap::new();
    for r in rows.iter_mut() {
        let sex = *assigned
            .entry(r.key.subject_id.clone())
            .or_insert_with(|| if rng.random::<bool>() { Sex::F } else { Sex::M });
        r.key.sex = sex;
    }
}

const FS: u32 = 16_000;

fn resonate(x: &[f64], freq: f64, bw: f64) -> Vec<f64> {
    let fs = FS as f64;
    let r = (-PI * bw / fs).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / fs).cos();
    let a2 = -r * r;
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let y1 = if n >= 1 { y[n - 1] } else { 0.0 };
        let y2 = if n >= 2 { y[n - 2] } else { 0.0 };
        y[n] = x[n] + a1 * y1 + a2 * y2;
    }
    y
}

/// Impulse-train source through a resonator cascade, with a little noise.
pub fn vowel(f0: f64, formants: &[f64], seconds: f64, seed: u64) -> PcmBuffer {
    let n = (seconds * FS as f64) as usize;
    let period = FS as f64 / f0;
    let mut x = vec![0.0; n];
    let mut t = 0.0;
    while (t as usize) < n {
        x[t as usize] = 1.0;
        t += period;
    }
    for &f in formants {
        x = resonate(&x, f, 80.0 + 0.05 * f);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = x.iter().map(|v| 0.7 * v / peak + 0.002 * normal(&mut rng)).collect();
    PcmBuffer::new(samples, FS)
}

/// Writes one scripted vowel per subject and a manifest next to them.
/// Girls get a higher F0 and higher formants than boys.
pub fn write_wav_corpus(dir: &Path, girls: usize, boys: usize) -> PathBuf {
    let mut lines = vec!["subject_id,age,sex,speech_type,quality,audio_path".to_string()];
    let subjects = (0..girls).map(|i| (Sex::F, i)).chain((0..boys).map(|i| (Sex::M, i)));
    for (k, (sex, i)) in subjects.enumerate() {
        let (f0, scale) = match sex {
            Sex::F => (260.0 + 7.0 * i as f64, 1.08),
            Sex::M => (215.0 + 7.0 * i as f64, 0.95),
        };
        let formants: Vec<f64> = [650.0, 1900.0, 2900.0, 3900.0].iter().map(|f| f * scale + 9.0 * i as f64).collect();
        let name = format!("{sex}{i:02}.wav");
        write_wav(&dir.join(&name), &vowel(f0, &formants, 1.0, k as u64)).unwrap();
        lines.push(format!("{sex}{i:02},10,{sex},scripted,good,{name}"));
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, lines.join("\n") + "\n").unwrap();
    manifest
}

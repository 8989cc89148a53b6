mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use childvoice::corpus::Sex;
use childvoice::features::{inventory, write_feature_csv, FeatureRow};
use common::{synthetic_rows, Cohort};

fn childvoice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_childvoice")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_rows(path: &Path, rows: &[FeatureRow]) {
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, inventory(), rows).unwrap();
    fs::write(path, buf).unwrap();
}

const QUICK: &str = r#"
feature_sets = ["af"]
groupings = ["per_year"]
speech_types = ["both"]
grid_n_trees = [40]
grid_k_features = ["sqrt"]
grid_min_samples_split = [2]
"#;

#[test]
fn extract_writes_one_row_per_recording_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_wav_corpus(dir.path(), 2, 1);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = childvoice(&["extract", "--manifest", p(&manifest), "-o", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("subject_id,age,sex,speech_type,segment_index,F0_mean"));
    assert_eq!(text, fs::read_to_string(&b).unwrap());
}

#[test]
fn strict_extract_fails_on_corrupt_audio_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_wav_corpus(dir.path(), 2, 1);
    fs::write(dir.path().join("M00.wav"), b"RIFF not really").unwrap();
    let out = dir.path().join("features.csv");
    let o = childvoice(&["--strict", "extract", "--manifest", p(&manifest), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());

    let o = childvoice(&["extract", "--manifest", p(&manifest), "-o", p(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn extract_with_nothing_readable_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = common::write_wav_corpus(dir.path(), 1, 0);
    fs::write(dir.path().join("F00.wav"), b"junk").unwrap();
    let out = dir.path().join("features.csv");
    let o = childvoice(&["extract", "--manifest", p(&manifest), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "cutoff = 2.0\n").unwrap();
    let o = childvoice(&["--config", p(&cfg), "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutoff"));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(childvoice(&["--config", p(&cfg), "run"]).status.code(), Some(1));
    assert_eq!(childvoice(&["run", "--feature-sets", "nope"]).status.code(), Some(1));
    assert_eq!(childvoice(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(childvoice(&["run"]).status.code(), Some(1));
}

#[test]
fn run_writes_every_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.csv");
    write_rows(&features, &synthetic_rows(&[Cohort::new(11, 12, 4.0)], 1));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("{QUICK}features = \"features.csv\"\nclustering = [\"BC\"]\n")).unwrap();
    let mut reports = Vec::new();
    for out in ["out1", "out2"] {
        let o = childvoice(&["--config", p(&cfg), "--seed", "5", "run", "--output-dir", p(&dir.path().join(out))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("per_year"));
        let out = dir.path().join(out);
        for f in ["scores.csv", "importance.csv", "stats.csv", "report.json", "models/per_year_11_af_both_BC.forest.json"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        reports.push(fs::read_to_string(out.join("report.json")).unwrap());

        let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
        let mut r = csv::Reader::from_reader(scores.as_bytes());
        let h = r.headers().unwrap().clone();
        let mean_idx = h.iter().position(|c| c == "mean_F1").unwrap();
        let rec = r.records().next().unwrap().unwrap();
        let mean: f64 = rec[mean_idx].parse().unwrap();
        assert!(mean >= 0.9, "mean F1 {mean}");

        // without clustering, factors are the raw feature names
        let imp = fs::read_to_string(out.join("importance.csv")).unwrap();
        let mut r = csv::Reader::from_reader(imp.as_bytes());
        let names: Vec<String> = r.records().map(|x| x.unwrap()[1].to_string()).collect();
        assert_eq!(names.len(), 23);
        assert!(names.iter().all(|n| inventory().contains(&n.as_str())));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn cluster_train_evaluate_importance_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = |f: &str| dir.path().join(f);
    write_rows(&d("features.csv"), &synthetic_rows(&[Cohort::new(9, 12, 4.0), Cohort::new(10, 12, 4.0)], 2));
    let cfg = d("run.toml");
    fs::write(&cfg, QUICK).unwrap();
    let features = d("features.csv");
    let common = ["--features", p(&features), "--feature-set", "eg_vtl", "--group", "9"];
    let run = |args: &[&str]| {
        let mut full = vec!["--config", p(&cfg)];
        full.extend_from_slice(args);
        let o = childvoice(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&[&["cluster"][..], &common, &["-o", p(&d("factors.json"))]].concat());
    let factors = childvoice::clustering::FactorSet::from_json(&fs::read_to_string(d("factors.json")).unwrap()).unwrap();
    assert!(factors.len() < 71);
    run(&[&["train"][..], &common, &["--factors", p(&d("factors.json")), "-o", p(&d("forest.json"))]].concat());
    let printed = run(
        &[
            &["evaluate"][..],
            &common,
            &["--forest", p(&d("forest.json")), "--factors", p(&d("factors.json")), "-o", p(&d("pred.csv"))],
        ]
        .concat(),
    );
    assert!(printed.contains("subjects:"));
    assert_eq!(fs::read_to_string(d("pred.csv")).unwrap().lines().count(), 1 + 24 * 3);
    run(&["importance", "--forest", p(&d("forest.json")), "--factors", p(&d("factors.json")), "-o", p(&d("imp.csv"))]);
    let imp = fs::read_to_string(d("imp.csv")).unwrap();
    assert_eq!(imp.lines().count(), 1 + factors.len());

    let o = childvoice(&[&["evaluate"][..], &common, &["--forest", p(&d("forest.json")), "-o", p(&d("x.csv"))]].concat());
    assert_eq!(o.status.code(), Some(2), "unprojected columns must not match the forest");
}

fn stats_csv(dir: &Path, rows: &[FeatureRow], ages: Option<&str>) -> Vec<csv::StringRecord> {
    let features = dir.join("f.csv");
    write_rows(&features, rows);
    let out = dir.join("stats.csv");
    let mut args = vec!["stats", "--features", p(&features), "-o", p(&out)];
    if let Some(a) = ages {
        args.extend(["--ages", a]);
    }
    let o = childvoice(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("age,feature,t,p,d,band,n_girls,n_boys"));
    csv::Reader::from_reader(text.as_bytes()).records().map(Result::unwrap).collect()
}

#[test]
fn stats_sign_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = synthetic_rows(&[Cohort::new(12, 30, 0.0)], 3);
    // one segment per subject keeps the samples independent
    rows.retain(|r| r.key.segment_index == 0);
    let girls: Vec<FeatureRow> = rows.iter().filter(|r| r.key.sex == Sex::F).cloned().collect();
    let sd = {
        let v: Vec<f64> = girls.iter().map(|r| r.features.get("HNR").unwrap()).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    // boys copy the girls: identical on loudness, one SD higher on HNR
    let mut boys = girls.clone();
    for (i, b) in boys.iter_mut().enumerate() {
        b.key.sex = Sex::M;
        b.key.subject_id = format!("boy{i}");
        let hnr = b.features.get("HNR").unwrap();
        b.features.set("HNR", Some(hnr + sd));
    }
    rows = girls.into_iter().chain(boys).collect();
    let recs = stats_csv(dir.path(), &rows, None);
    let find = |name: &str| recs.iter().find(|r| &r[1] == name).unwrap().clone();
    let loud: f64 = find("loudness_mean")[4].parse().unwrap();
    assert_eq!(loud, 0.0);
    let hnr = find("HNR");
    let d: f64 = hnr[4].parse().unwrap();
    assert!((d + 1.0).abs() < 1e-9, "boys larger by one SD gives d = -1, got {d}");
    assert_eq!(&hnr[0], "12");

    assert!(stats_csv(dir.path(), &rows, Some("")).is_empty());
    assert!(stats_csv(dir.path(), &rows, Some("13")).iter().all(|r| &r[2] == "NA"));
}

use std::ffi::{c_char, c_int, CStr};
use std::ptr;

use childvoice_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { cv_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

/// Two columns: x0 separates the classes at 0, x1 is a copy of x0 plus a tiny wobble.
fn toy() -> (Vec<f64>, Vec<c_int>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..40 {
        let v = i as f64 - 19.5;
        x.extend([v, v + 0.01 * (i % 3) as f64]);
        y.push(c_int::from(v > 0.0));
    }
    (x, y)
}

#[test]
fn forest_round_trip_through_json() {
    let (x, y) = toy();
    let mut forest = ptr::null_mut();
    let s = unsafe { cv_forest_train(x.as_ptr(), 40, 2, y.as_ptr(), 20, 0, 2, 0, 7, &mut forest) };
    assert_eq!(s, CvStatus::Ok, "{}", last_error());

    let mut n = 0usize;
    assert_eq!(unsafe { cv_forest_n_features(forest, &mut n) }, CvStatus::Ok);
    assert_eq!(n, 2);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { cv_forest_to_json(forest, &mut json) }, CvStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { cv_forest_from_json(json, &mut again) }, CvStatus::Ok);
    unsafe { cv_string_free(json) };

    for (row, want) in [([-10.0, -10.0], 0), ([10.0, 10.0], 1)] {
        for f in [forest, again] {
            let (mut label, mut vote_f) = (-1, -1.0);
            assert_eq!(unsafe { cv_forest_predict(f, row.as_ptr(), 2, &mut label, &mut vote_f) }, CvStatus::Ok);
            assert_eq!(label, want);
            assert!((0.0..=1.0).contains(&vote_f));
        }
    }

    let mut w = [0.0; 2];
    assert_eq!(unsafe { cv_forest_importance(forest, w.as_mut_ptr(), 2) }, CvStatus::Ok);
    assert!((w[0] + w[1] - 1.0).abs() < 1e-9);
    let mut short = [0.0; 1];
    assert_eq!(unsafe { cv_forest_importance(forest, short.as_mut_ptr(), 1) }, CvStatus::BufferTooSmall);

    let (mut label, mut vote_f) = (0, 0.0);
    let s = unsafe { cv_forest_predict(forest, [1.0].as_ptr(), 1, &mut label, &mut vote_f) };
    assert_eq!(s, CvStatus::InvalidInput);
    assert!(last_error().contains("forest expects 2"));

    unsafe {
        cv_forest_free(forest);
        cv_forest_free(again);
        cv_forest_free(ptr::null_mut());
    }
}

#[test]
fn correlated_columns_merge_into_one_factor() {
    let (x, _) = toy();
    let mut fs = ptr::null_mut();
    assert_eq!(unsafe { cv_factors_fit(x.as_ptr(), 40, 2, 0.75, &mut fs) }, CvStatus::Ok);
    let (mut k, mut inputs) = (0usize, 0usize);
    unsafe {
        assert_eq!(cv_factors_len(fs, &mut k), CvStatus::Ok);
        assert_eq!(cv_factors_n_inputs(fs, &mut inputs), CvStatus::Ok);
    }
    assert_eq!((k, inputs), (1, 2));
    let mut score = [f64::NAN];
    let s = unsafe { cv_factors_transform(fs, [1.0, 1.0].as_ptr(), 2, score.as_mut_ptr(), 1) };
    assert_eq!(s, CvStatus::Ok);
    assert!(score[0].is_finite());
    unsafe { cv_factors_free(fs) };
}

#[test]
fn malformed_json_is_a_parse_error() {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { cv_forest_from_json(c"{not json".as_ptr(), &mut f) }, CvStatus::Parse);
    assert!(f.is_null());
}

#[test]
fn statistics_match_the_library() {
    let a = [2.0, 3.0, 4.0, 5.0];
    let b = [1.0, 2.0, 3.0, 4.0];
    let (mut t, mut df, mut p, mut d) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(cv_welch_t(a.as_ptr(), 4, b.as_ptr(), 4, &mut t, &mut df, &mut p), CvStatus::Ok);
        assert_eq!(cv_cohens_d(a.as_ptr(), 4, b.as_ptr(), 4, &mut d), CvStatus::Ok);
    }
    let w = childvoice::eval::welch_t(&a, &b).unwrap();
    assert_eq!((t, df, p), (w.t, w.df, w.p_two_tailed));
    assert!(d > 0.0);

    let truth = [0, 0, 1, 1];
    let pred = [0, 1, 1, 1];
    let (mut ff, mut fm, mut mean, mut weighted) = (0.0, 0.0, 0.0, 0.0);
    let s = unsafe { cv_f1_scores(truth.as_ptr(), pred.as_ptr(), 4, &mut ff, &mut fm, &mut mean, &mut weighted) };
    assert_eq!(s, CvStatus::Ok);
    assert!((ff - 2.0 / 3.0).abs() < 1e-12);
    assert!((fm - 0.8).abs() < 1e-12);
}

#[test]
fn pcm_analysis_fills_the_inventory() {
    let n = cv_inventory_len();
    let sr = 16_000u32;
    let samples: Vec<f64> = (0..sr)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / sr as f64).sin())
        .collect();
    let mut out = vec![0.0; n];
    let s = unsafe { cv_analyze_pcm(samples.as_ptr(), samples.len(), sr, out.as_mut_ptr(), n) };
    assert_eq!(s, CvStatus::Ok, "{}", last_error());
    let f0 = (0..n)
        .find(|&i| unsafe { CStr::from_ptr(cv_inventory_name(i)) }.to_str().unwrap() == "F0_mean")
        .expect("F0_mean in inventory");
    assert!((out[f0] - 220.0).abs() < 2.0, "F0_mean {}", out[f0]);
    let mut short = vec![0.0; 3];
    let s = unsafe { cv_analyze_pcm(samples.as_ptr(), samples.len(), sr, short.as_mut_ptr(), 3) };
    assert_eq!(s, CvStatus::BufferTooSmall);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/childvoice.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

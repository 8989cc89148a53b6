//! C ABI for the `childvoice` library.
//!
//! Every function returns a [`CvStatus`]; results come back through out
//! pointers. Objects are opaque handles released with their `_free`
//! function. The message of the last failure on the calling thread is
//! available from [`cv_last_error`].
//!
//! Class codes are 0 for girls (F) and 1 for boys (M). Missing feature
//! values are reported as NaN.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use childvoice::balance::LabeledMatrix;
use childvoice::clustering::{cluster_columns, FactorSet};
use childvoice::corpus::{read_wav, PcmBuffer, Sex};
use childvoice::dsp::{analyze, DspConfig};
use childvoice::eval::{cohens_d, f1_per_class, welch_t};
use childvoice::features::{extract_vector, inventory};
use childvoice::model::{train_erf, CandidateCount, ErfParams, Forest};
use childvoice::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    InsufficientData = 4,
    Parse = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Trained extremely randomized forest.
pub struct CvForest(Forest);

/// Fitted factor set.
pub struct CvFactorSet(FactorSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CvStatus {
    match e {
        Error::Io { .. } | Error::Audio(_) => CvStatus::Io,
        Error::InsufficientData(_) => CvStatus::InsufficientData,
        Error::Json(_) | Error::Csv(_) | Error::Manifest { .. } | Error::FeatureCsv { .. } => CvStatus::Parse,
        Error::InvalidInput(_) | Error::FormantOrdering(_) => CvStatus::InvalidInput,
    }
}

struct Fail(CvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CvStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".to_string());
            CvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CvStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    *p = v;
    Ok(())
}

fn sex_of(code: c_int) -> Result<Sex, Fail> {
    match code {
        0 => Ok(Sex::F),
        1 => Ok(Sex::M),
        c => Err(Fail(CvStatus::InvalidInput, format!("class code {c} is not 0 or 1"))),
    }
}

fn opt_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, or 0 when there is none.
#[no_mangle]
pub unsafe extern "C" fn cv_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Number of features in the full inventory.
#[no_mangle]
pub extern "C" fn cv_inventory_len() -> usize {
    inventory().len()
}

/// Static, NUL-terminated name of inventory feature `index`, or null when
/// out of range.
#[no_mangle]
pub extern "C" fn cv_inventory_name(index: usize) -> *const c_char {
    static NAMES: std::sync::OnceLock<Vec<CString>> = std::sync::OnceLock::new();
    let names = NAMES.get_or_init(|| inventory().iter().map(|n| CString::new(*n).unwrap()).collect());
    names.get(index).map_or(ptr::null(), |c| c.as_ptr())
}

fn analyze_into(audio: &PcmBuffer, out: &mut [f64]) -> Result<(), Fail> {
    let inv = inventory();
    if out.len() < inv.len() {
        return Err(Fail(
            CvStatus::BufferTooSmall,
            format!("output holds {} values, inventory has {}", out.len(), inv.len()),
        ));
    }
    let v = extract_vector(&analyze(audio, &DspConfig::default())?);
    for (slot, value) in out.iter_mut().zip(v.values()) {
        *slot = opt_nan(value);
    }
    Ok(())
}

/// Analyzes mono PCM samples in [-1, 1] with default settings and writes
/// the inventory-ordered feature vector (pF is always NaN; it needs a
/// cohort).
#[no_mangle]
pub unsafe extern "C" fn cv_analyze_pcm(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    out: *mut f64,
    out_len: usize,
) -> CvStatus {
    guard(|| {
        let s = slice_arg(samples, n_samples, "samples")?;
        let out = out_slice(out, out_len, "out")?;
        analyze_into(&PcmBuffer::new(s.to_vec(), sample_rate), out)
    })
}

/// [`cv_analyze_pcm`] on a 16-bit PCM WAV file.
#[no_mangle]
pub unsafe extern "C" fn cv_analyze_wav(path: *const c_char, out: *mut f64, out_len: usize) -> CvStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let out = out_slice(out, out_len, "out")?;
        analyze_into(&read_wav(std::path::Path::new(p))?, out)
    })
}

/// Per-class F1 of two label arrays (codes 0 = F, 1 = M). Undefined class
/// scores are NaN.
#[no_mangle]
pub unsafe extern "C" fn cv_f1_scores(
    truth: *const c_int,
    predicted: *const c_int,
    n: usize,
    f1_f: *mut f64,
    f1_m: *mut f64,
    mean_f1: *mut f64,
    weighted_f1: *mut f64,
) -> CvStatus {
    guard(|| {
        let t: Vec<Sex> = slice_arg(truth, n, "truth")?.iter().map(|&c| sex_of(c)).collect::<Result<_, _>>()?;
        let p: Vec<Sex> = slice_arg(predicted, n, "predicted")?.iter().map(|&c| sex_of(c)).collect::<Result<_, _>>()?;
        let s = f1_per_class(&t, &p)?;
        write_out(f1_f, opt_nan(s.f1_f), "f1_f")?;
        write_out(f1_m, opt_nan(s.f1_m), "f1_m")?;
        write_out(mean_f1, s.mean_f1, "mean_f1")?;
        write_out(weighted_f1, s.weighted_f1, "weighted_f1")
    })
}

/// Welch t-test of `a` against `b`.
#[no_mangle]
pub unsafe extern "C" fn cv_welch_t(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    t: *mut f64,
    df: *mut f64,
    p: *mut f64,
) -> CvStatus {
    guard(|| {
        let w = welch_t(slice_arg(a, n_a, "a")?, slice_arg(b, n_b, "b")?)?;
        write_out(t, w.t, "t")?;
        write_out(df, w.df, "df")?;
        write_out(p, w.p_two_tailed, "p")
    })
}

/// Cohen's d of `a` minus `b` with the pooled standard deviation.
#[no_mangle]
pub unsafe extern "C" fn cv_cohens_d(a: *const f64, n_a: usize, b: *const f64, n_b: usize, d: *mut f64) -> CvStatus {
    guard(|| {
        let c = cohens_d(slice_arg(a, n_a, "a")?, slice_arg(b, n_b, "b")?)?;
        write_out(d, c.d, "d")
    })
}

fn column_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("x{j}")).collect()
}

/// Clusters the columns of a row-major `n_rows x n_cols` matrix. Column
/// `j` is named `x{j}`.
#[no_mangle]
pub unsafe extern "C" fn cv_factors_fit(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    cutoff: f64,
    out: *mut *mut CvFactorSet,
) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice_arg(x, n_rows * n_cols, "x")?;
        let columns: Vec<Vec<f64>> = (0..n_cols).map(|j| (0..n_rows).map(|i| x[i * n_cols + j]).collect()).collect();
        let f = cluster_columns(&column_names(n_cols), &columns, cutoff)?;
        *out = Box::into_raw(Box::new(CvFactorSet(f)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cv_factors_from_json(json: *const c_char, out: *mut *mut CvFactorSet) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = FactorSet::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(CvFactorSet(f)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cv_factors_free(f: *mut CvFactorSet) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cv_factors_len(f: *const CvFactorSet, out: *mut usize) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("factor set"))?;
        write_out(out, f.0.len(), "out")
    })
}

/// Number of input columns the factor set expects.
#[no_mangle]
pub unsafe extern "C" fn cv_factors_n_inputs(f: *const CvFactorSet, out: *mut usize) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("factor set"))?;
        write_out(out, f.0.feature_names.len(), "out")
    })
}

/// Projects one row (columns in the fitting order) onto the factors.
#[no_mangle]
pub unsafe extern "C" fn cv_factors_transform(
    f: *const CvFactorSet,
    row: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> CvStatus {
    guard(|| {
        let f = &f.as_ref().ok_or_else(|| null("factor set"))?.0;
        let names = &f.feature_names;
        if n != names.len() {
            return Err(Fail(
                CvStatus::InvalidInput,
                format!("row has {n} values, factor set expects {}", names.len()),
            ));
        }
        if out_len < f.len() {
            return Err(Fail(CvStatus::BufferTooSmall, format!("output holds {out_len} values, need {}", f.len())));
        }
        let row = slice_arg(row, n, "row")?.to_vec();
        let scores = f.transform_rows(names, &[row])?;
        out_slice(out, out_len, "out")?[..f.len()].copy_from_slice(&scores[0]);
        Ok(())
    })
}

/// Trains a forest on a row-major `n_rows x n_cols` matrix with labels
/// `y` (0 = F, 1 = M). `k_features` 0 means floor(sqrt(n_cols)) and
/// `max_depth` 0 means unlimited.
#[no_mangle]
pub unsafe extern "C" fn cv_forest_train(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const c_int,
    n_trees: usize,
    k_features: usize,
    min_samples_split: usize,
    max_depth: usize,
    seed: u64,
    out: *mut *mut CvForest,
) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice_arg(x, n_rows * n_cols, "x")?;
        let y: Vec<Sex> = slice_arg(y, n_rows, "y")?.iter().map(|&c| sex_of(c)).collect::<Result<_, _>>()?;
        let rows: Vec<Vec<f64>> = x.chunks(n_cols.max(1)).take(n_rows).map(<[f64]>::to_vec).collect();
        let ids = (0..n_rows).map(|i| i.to_string()).collect();
        let d = LabeledMatrix::new(column_names(n_cols), rows, y, ids)?;
        let params = ErfParams {
            n_trees,
            k_features: if k_features == 0 { CandidateCount::Sqrt } else { CandidateCount::Fixed(k_features) },
            min_samples_split,
            max_depth: (max_depth > 0).then_some(max_depth),
            seed,
        };
        *out = Box::into_raw(Box::new(CvForest(train_erf(&d, &params)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cv_forest_from_json(json: *const c_char, out: *mut *mut CvForest) -> CvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = Forest::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(CvForest(f)));
        Ok(())
    })
}

/// Serializes the forest to a newly allocated JSON string, released with
/// [`cv_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cv_forest_to_json(f: *const CvForest, out: *mut *mut c_char) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("forest"))?;
        let s = CString::new(f.0.to_json()?).map_err(|e| Fail(CvStatus::InvalidInput, e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cv_forest_free(f: *mut CvForest) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cv_forest_n_features(f: *const CvForest, out: *mut usize) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("forest"))?;
        write_out(out, f.0.feature_names.len(), "out")
    })
}

/// Predicts one row. `vote_f` receives the fraction of trees voting F.
#[no_mangle]
pub unsafe extern "C" fn cv_forest_predict(
    f: *const CvForest,
    row: *const f64,
    n: usize,
    label: *mut c_int,
    vote_f: *mut f64,
) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("forest"))?;
        let p = f.0.predict(slice_arg(row, n, "row")?)?;
        write_out(label, p.label.index() as c_int, "label")?;
        if !vote_f.is_null() {
            *vote_f = p.vote_fraction[0];
        }
        Ok(())
    })
}

/// Normalized impurity importance, one weight per input column.
#[no_mangle]
pub unsafe extern "C" fn cv_forest_importance(f: *const CvForest, out: *mut f64, out_len: usize) -> CvStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("forest"))?;
        let w = f.0.importance().weights;
        if out_len < w.len() {
            return Err(Fail(CvStatus::BufferTooSmall, format!("output holds {out_len} values, need {}", w.len())));
        }
        out_slice(out, out_len, "out")?[..w.len()].copy_from_slice(&w);
        Ok(())
    })
}

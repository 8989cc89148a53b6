use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{DspConfig, FrameSeries, Frames};

/// Formants of one voiced frame, lowest first. At most four entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FormantFrame {
    pub frame_index: usize,
    pub frequencies: Vec<f64>,
    pub bandwidths: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FormantTrack {
    pub frames: Vec<FormantFrame>,
}

impl FormantTrack {
    /// Values of formant `n` (0-based) over frames where it was found.
    pub fn frequencies(&self, n: usize) -> Vec<f64> {
        self.frames.iter().filter_map(|f| f.frequencies.get(n).copied()).collect()
    }

    pub fn bandwidths(&self, n: usize) -> Vec<f64> {
        self.frames.iter().filter_map(|f| f.bandwidths.get(n).copied()).collect()
    }

    pub fn frame(&self, frame_index: usize) -> Option<&FormantFrame> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }
}

/// Levinson-Durbin recursion on autocorrelation lags `r[0..=order]`.
/// Returns predictor coefficients `a[1..=order]` of
/// A(z) = 1 + a1 z^-1 + ... + ap z^-p, or `None` when the autocorrelation
/// is not positive definite.
pub fn levinson_durbin(r: &[f64], order: usize) -> Option<Vec<f64>> {
    if r.len() <= order || r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return None;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return None;
        }
    }
    Some(a[1..].to_vec())
}

/// Roots of z^p + a1 z^(p-1) + ... + ap as (real, imag) pairs, via the
/// eigenvalues of the companion matrix.
pub fn lpc_roots(coeffs: &[f64]) -> Vec<(f64, f64)> {
    let p = coeffs.len();
    if p == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (j, c) in coeffs.iter().enumerate() {
        m[(0, j)] = -c;
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| x.iter().zip(&x[k.min(x.len())..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Formant candidates of a single frame: (frequency, bandwidth) sorted by
/// frequency, restricted to the configured band and bandwidth gate.
pub(crate) fn frame_formants(frame: &[f64], window: &[f64], fs: f64, cfg: &DspConfig) -> Option<Vec<(f64, f64)>> {
    let mut y = Vec::with_capacity(frame.len());
    for i in 0..frame.len() {
        let prev = if i > 0 { frame[i - 1] } else { 0.0 };
        y.push((frame[i] - cfg.preemphasis * prev) * window[i]);
    }
    let r = autocorrelation(&y, cfg.lpc_order);
    let a = levinson_durbin(&r, cfg.lpc_order)?;
    let mut cands: Vec<(f64, f64)> = lpc_roots(&a)
        .into_iter()
        .filter(|&(_, im)| im > 0.0)
        .filter_map(|(re, im)| {
            let mag = re.hypot(im);
            if mag <= 0.0 {
                return None;
            }
            let freq = im.atan2(re) * fs / (2.0 * PI);
            let bw = -(fs / PI) * mag.ln();
            (freq > cfg.formant_min && freq < cfg.formant_max && bw > 0.0 && bw < cfg.max_formant_bandwidth)
                .then_some((freq, bw))
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(cands)
}

/// LPC root-solving formant tracker over voiced frames. Frames whose LPC
/// fit is unstable are skipped; frames with fewer than four candidates
/// contribute only the formants found.
pub fn formant_track(frames: &Frames, pitch: &FrameSeries, cfg: &DspConfig) -> FormantTrack {
    let fs = frames.sample_rate as f64;
    let out = (0..frames.n_frames)
        .filter(|&i| pitch.voiced_mask[i])
        .filter_map(|i| {
            let cands = frame_formants(frames.frame(i), frames.window(), fs, cfg)?;
            if cands.is_empty() {
                return None;
            }
            let (frequencies, bandwidths) = cands.into_iter().take(4).unzip();
            Some(FormantFrame {
                frame_index: i,
                frequencies,
                bandwidths,
            })
        })
        .collect();
    FormantTrack { frames: out }
}

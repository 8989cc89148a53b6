use super::{DspConfig, FrameSeries, Frames};

/// Candidate peaks within this fraction of the strongest one are treated
/// as equivalent; the shortest lag among them wins (octave-error guard).
const OCTAVE_TOLERANCE: f64 = 0.9;

/// Normalized cross-correlation between the mean-removed frame and itself
/// shifted by `lag` samples. Zero when either part has no energy.
pub fn normalized_autocorrelation(frame: &[f64], lag: usize) -> f64 {
    if lag >= frame.len() {
        return 0.0;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let n = frame.len() - lag;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let a = frame[i] - mean;
        let b = frame[i + lag] - mean;
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx <= 0.0 || yy <= 0.0 {
        return 0.0;
    }
    xy / (xx * yy).sqrt()
}

/// Vertex of the parabola through three equally spaced points, as
/// (offset from the middle point, interpolated value).
fn parabolic(left: f64, mid: f64, right: f64) -> (f64, f64) {
    let denom = left - 2.0 * mid + right;
    if denom >= 0.0 {
        return (0.0, mid);
    }
    let delta = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
    (delta, mid - 0.25 * (left - right) * delta)
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Refined (lag, correlation) of the pitch peak of one frame, if any.
fn frame_peak(frame: &[f64], lag_min: usize, lag_max: usize) -> Option<(f64, f64)> {
    let lo = lag_min.saturating_sub(1).max(1);
    let hi = (lag_max + 1).min(frame.len() - 2);
    if hi <= lo + 1 {
        return None;
    }
    let r: Vec<f64> = (lo..=hi).map(|l| normalized_autocorrelation(frame, l)).collect();
    let at = |lag: usize| r[lag - lo];
    let peaks: Vec<usize> = (lag_min.max(lo + 1)..=lag_max.min(hi - 1))
        .filter(|&l| at(l) > 0.0 && at(l) >= at(l - 1) && at(l) >= at(l + 1))
        .collect();
    let best = peaks.iter().map(|&l| at(l)).fold(f64::NEG_INFINITY, f64::max);
    let chosen = *peaks.iter().find(|&&l| at(l) >= OCTAVE_TOLERANCE * best)?;
    let (delta, value) = parabolic(at(chosen - 1), at(chosen), at(chosen + 1));
    Some((chosen as f64 + delta, value.min(1.0)))
}

/// Per-frame F0 by normalized autocorrelation peak search in
/// [f0_min, f0_max]. A frame is voiced iff its peak correlation reaches the
/// voicing threshold and its RMS is at least `silence_ratio` of the loudest
/// frame's RMS.
pub fn pitch_track(frames: &Frames, cfg: &DspConfig) -> FrameSeries {
    let mut out = frames.scaffold();
    let fs = frames.sample_rate as f64;
    let lag_min = (fs / cfg.f0_max).floor().max(2.0) as usize;
    let lag_max = (fs / cfg.f0_min).ceil() as usize;
    let energies: Vec<f64> = (0..frames.n_frames).map(|i| rms(frames.frame(i))).collect();
    let loudest = energies.iter().copied().fold(0.0, f64::max);
    for i in 0..frames.n_frames {
        if energies[i] <= 0.0 || energies[i] < cfg.silence_ratio * loudest {
            continue;
        }
        if let Some((lag, strength)) = frame_peak(frames.frame(i), lag_min, lag_max) {
            if strength >= cfg.voicing_threshold {
                out.values[i] = Some(fs / lag);
                out.voiced_mask[i] = true;
            }
        }
    }
    out
}

/// Mean harmonic-to-noise ratio (dB) over voiced frames, from the
/// normalized autocorrelation r at the pitch lag: 10 log10(r / (1 - r)).
pub fn hnr(frames: &Frames, pitch: &FrameSeries) -> Option<f64> {
    let fs = frames.sample_rate as f64;
    let per_frame: Vec<f64> = pitch
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, f0)| {
            let f0 = (*f0)?;
            let frame = frames.frame(i);
            let lag = (fs / f0).round() as usize;
            if lag < 2 || lag + 2 >= frame.len() {
                return None;
            }
            let (_, r) = parabolic(
                normalized_autocorrelation(frame, lag - 1),
                normalized_autocorrelation(frame, lag),
                normalized_autocorrelation(frame, lag + 1),
            );
            let r = r.clamp(1e-6, 1.0 - 1e-6);
            Some(10.0 * (r / (1.0 - r)).log10())
        })
        .collect();
    if per_frame.is_empty() {
        None
    } else {
        Some(crate::numeric::mean(&per_frame))
    }
}

use std::f64::consts::PI;

use super::resample::resample;
use super::{DspConfig, FrameSeries};
use crate::corpus::PcmBuffer;
use crate::error::{Error, Result};

/// A resampled, peak-normalized signal cut into overlapping frames.
#[derive(Debug, Clone)]
pub struct Frames {
    /// Signal at `sample_rate`, scaled so that max |x| = 1 (unless silent).
    pub signal: Vec<f64>,
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_frames: usize,
    /// Peak absolute amplitude of the resampled input before normalization.
    pub gain: f64,
    window: Vec<f64>,
}

impl Frames {
    pub fn frame(&self, i: usize) -> &[f64] {
        let start = i * self.hop;
        &self.signal[start..start + self.frame_len]
    }

    pub fn windowed(&self, i: usize) -> Vec<f64> {
        self.frame(i).iter().zip(&self.window).map(|(x, w)| x * w).collect()
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn duration(&self) -> f64 {
        self.signal.len() as f64 / self.sample_rate as f64
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn frame_seconds(&self) -> f64 {
        self.frame_len as f64 / self.sample_rate as f64
    }

    /// Empty contour with every frame marked unvoiced.
    pub fn scaffold(&self) -> FrameSeries {
        FrameSeries {
            values: vec![None; self.n_frames],
            voiced_mask: vec![false; self.n_frames],
            frame_hop: self.hop_seconds(),
            frame_length: self.frame_seconds(),
        }
    }
}

pub(crate) fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Resamples to the analysis rate, normalizes peak amplitude to 1 and
/// frames the signal. Frame count is floor((N - L) / H) + 1.
pub fn preprocess(audio: &PcmBuffer, cfg: &DspConfig) -> Result<Frames> {
    if audio.samples.is_empty() {
        return Err(Error::invalid("empty audio buffer"));
    }
    if audio.sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let rate = cfg.sample_rate;
    let frame_len = (cfg.frame_length * rate as f64).round() as usize;
    let hop = (cfg.frame_hop * rate as f64).round() as usize;
    if frame_len == 0 || hop == 0 {
        return Err(Error::invalid("frame length and hop must be positive"));
    }
    let mut signal = resample(&audio.samples, audio.sample_rate, rate);
    if signal.len() < frame_len {
        return Err(Error::invalid(format!(
            "audio shorter than one frame ({} < {} samples)",
            signal.len(),
            frame_len
        )));
    }
    let gain = signal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if gain > 0.0 {
        signal.iter_mut().for_each(|x| *x /= gain);
    }
    let n_frames = (signal.len() - frame_len) / hop + 1;
    Ok(Frames {
        signal,
        sample_rate: rate,
        frame_len,
        hop,
        n_frames,
        gain,
        window: hamming(frame_len),
    })
}

//! Low-level acoustic descriptors of a single speech segment.
//!
//! Every descriptor is computed on a 16 kHz, peak-normalized copy of the
//! input that is cut into Hamming-windowed frames (25 ms / 10 ms by
//! default). Undefined per-frame values are `None` and are skipped by all
//! downstream aggregation.

mod formants;
mod frames;
mod pitch;
mod pulses;
mod resample;
mod spectral;
mod voicing;

use serde::{Deserialize, Serialize};

use crate::corpus::PcmBuffer;
use crate::error::Result;

pub use formants::{formant_track, levinson_durbin, lpc_roots, FormantFrame, FormantTrack};
pub use frames::{preprocess, Frames};
pub use pitch::{hnr, normalized_autocorrelation, pitch_track};
pub use pulses::{glottal_pulses, jitter_features, shimmer_features, Jitter, PulseTrain, Shimmer};
pub use resample::resample;
pub use spectral::{loudness_contour, spectral_descriptors, SpectralDescriptors};
pub use voicing::{voicing_structure, VoicingStats};

/// Analysis parameters. All fields are exposed through the run
/// configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub sample_rate: u32,
    /// Frame length in seconds.
    pub frame_length: f64,
    /// Frame hop in seconds.
    pub frame_hop: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Frames quieter than this fraction of the loudest frame's RMS are unvoiced.
    pub silence_ratio: f64,
    pub lpc_order: usize,
    pub preemphasis: f64,
    pub formant_min: f64,
    pub formant_max: f64,
    pub max_formant_bandwidth: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate: 16_000,
            frame_length: 0.025,
            frame_hop: 0.010,
            f0_min: 100.0,
            f0_max: 600.0,
            voicing_threshold: 0.45,
            silence_ratio: 0.01,
            lpc_order: 12,
            preemphasis: 0.97,
            formant_min: 90.0,
            formant_max: 7800.0,
            max_formant_bandwidth: 700.0,
        }
    }
}

/// Per-frame contour. `values[i]` is `None` where the descriptor is
/// undefined for frame `i` (for F0: unvoiced frames).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub values: Vec<Option<f64>>,
    pub voiced_mask: Vec<bool>,
    pub frame_hop: f64,
    pub frame_length: f64,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Defined values over all frames.
    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Defined values restricted to voiced (`true`) or unvoiced frames.
    pub fn defined_where(&self, voiced: bool) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.voiced_mask)
            .filter(|(_, &v)| v == voiced)
            .filter_map(|(x, _)| *x)
            .collect()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced_mask.iter().filter(|&&v| v).count()
    }
}

/// Everything the feature layer needs from one segment.
#[derive(Debug, Clone)]
pub struct SegmentDescriptors {
    pub duration: f64,
    pub pitch: FrameSeries,
    pub pulses: PulseTrain,
    pub jitter: Jitter,
    pub shimmer: Shimmer,
    pub hnr: Option<f64>,
    pub formants: FormantTrack,
    pub loudness: FrameSeries,
    pub spectral: SpectralDescriptors,
    pub voicing: VoicingStats,
}

/// Runs the full descriptor chain on one segment.
pub fn analyze(audio: &PcmBuffer, cfg: &DspConfig) -> Result<SegmentDescriptors> {
    let frames = preprocess(audio, cfg)?;
    let pitch = pitch_track(&frames, cfg);
    let pulses = glottal_pulses(&frames, &pitch);
    let jitter = jitter_features(&pulses);
    let shimmer = shimmer_features(&pulses);
    let hnr = hnr(&frames, &pitch);
    let formants = formant_track(&frames, &pitch, cfg);
    let loudness = loudness_contour(&frames, &pitch);
    let spectral = spectral_descriptors(&frames, &pitch, &formants);
    let voicing = voicing_structure(&pitch, &loudness, frames.duration());
    Ok(SegmentDescriptors {
        duration: frames.duration(),
        pitch,
        pulses,
        jitter,
        shimmer,
        hnr,
        formants,
        loudness,
        spectral,
        voicing,
    })
}

#[cfg(test)]
pub(crate) mod synth {
    //! Test signal generators.
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::corpus::PcmBuffer;

    pub const FS: u32 = 16_000;

    pub fn sine(freq: f64, amp: f64, seconds: f64) -> PcmBuffer {
        let n = (seconds * FS as f64).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / FS as f64).sin())
            .collect();
        PcmBuffer::new(samples, FS)
    }

    pub fn sawtooth(freq: f64, seconds: f64) -> PcmBuffer {
        let n = (seconds * FS as f64).round() as usize;
        let samples = (0..n)
            .map(|i| {
                let phase = (freq * i as f64 / FS as f64).fract();
                0.5 * (2.0 * phase - 1.0)
            })
            .collect();
        PcmBuffer::new(samples, FS)
    }

    pub fn noise(seed: u64, amp: f64, seconds: f64) -> PcmBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (seconds * FS as f64).round() as usize;
        let samples = (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
        PcmBuffer::new(samples, FS)
    }

    pub fn impulse_train(freq: f64, seconds: f64) -> PcmBuffer {
        let n = (seconds * FS as f64).round() as usize;
        let period = FS as f64 / freq;
        let mut samples = vec![0.0; n];
        let mut t: f64 = 0.0;
        while (t as usize) < n {
            samples[t.round() as usize % n] = 1.0;
            t += period;
        }
        PcmBuffer::new(samples, FS)
    }

    /// Two-pole resonator: unity-peak-ish second order IIR section.
    pub fn resonate(x: &[f64], freq: f64, bw: f64) -> Vec<f64> {
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

    /// Impulse train through a cascade of resonators.
    pub fn vowel(f0: f64, formants: &[(f64, f64)], seconds: f64) -> PcmBuffer {
        let mut x = impulse_train(f0, seconds).samples;
        for &(f, bw) in formants {
            x = resonate(&x, f, bw);
        }
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        PcmBuffer::new(x.iter().map(|v| 0.8 * v / peak).collect(), FS)
    }

    pub fn scaled(a: &PcmBuffer, alpha: f64) -> PcmBuffer {
        PcmBuffer::new(a.samples.iter().map(|s| s * alpha).collect(), a.sample_rate)
    }

    pub fn silence(seconds: f64) -> PcmBuffer {
        PcmBuffer::new(vec![0.0; (seconds * FS as f64).round() as usize], FS)
    }
}

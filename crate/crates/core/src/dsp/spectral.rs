use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FormantTrack, FrameSeries, Frames};

const N_AUDITORY_BANDS: usize = 26;
const LOUDNESS_EXPONENT: f64 = 0.33;
const N_MEL_BANDS: usize = 26;
const N_MFCC: usize = 4;
const LOG_FLOOR: f64 = 1e-10;
const DB_FLOOR: f64 = 1e-12;

/// Magnitude spectra of the windowed frames (bins 0..=n_fft/2).
pub(crate) struct Spectra {
    pub mags: Vec<Vec<f64>>,
    pub bin_hz: f64,
}

impl Spectra {
    pub fn compute(frames: &Frames) -> Spectra {
        let n_fft = frames.frame_len.next_power_of_two();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
        let mags = (0..frames.n_frames)
            .map(|i| {
                let mut buf: Vec<Complex<f64>> = frames
                    .windowed(i)
                    .into_iter()
                    .map(|x| Complex::new(x, 0.0))
                    .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                    .take(n_fft)
                    .collect();
                fft.process(&mut buf);
                buf[..=n_fft / 2].iter().map(|c| c.norm()).collect()
            })
            .collect();
        Spectra {
            mags,
            bin_hz: frames.sample_rate as f64 / n_fft as f64,
        }
    }

    fn bins_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let n = self.mags.first().map_or(0, Vec::len);
        let a = (lo / self.bin_hz).ceil() as usize;
        let b = ((hi / self.bin_hz).floor() as usize).min(n.saturating_sub(1));
        a..=b
    }

    fn band_energy(&self, frame: usize, lo: f64, hi: f64) -> f64 {
        self.bins_in(lo, hi).map(|k| self.mags[frame][k].powi(2)).sum()
    }

    fn band_max(&self, frame: usize, lo: f64, hi: f64) -> f64 {
        self.bins_in(lo, hi).map(|k| self.mags[frame][k]).fold(0.0, f64::max)
    }

    /// Magnitude of the spectral peak nearest `freq` (the nearest bin and
    /// its two neighbours).
    fn harmonic(&self, frame: usize, freq: f64) -> f64 {
        let row = &self.mags[frame];
        let k = (freq / self.bin_hz).round() as usize;
        (k.saturating_sub(1)..=(k + 1).min(row.len() - 1))
            .map(|i| row[i])
            .fold(0.0, f64::max)
    }

    /// Least-squares slope (dB per Hz) of the log-magnitude spectrum over
    /// [lo, hi].
    fn slope(&self, frame: usize, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .bins_in(lo, hi)
            .map(|k| (k as f64 * self.bin_hz, 20.0 * self.mags[frame][k].max(DB_FLOOR).log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn bark(f: f64) -> f64 {
    13.0 * (0.00076 * f).atan() + 3.5 * (f / 7500.0).powi(2).atan()
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

/// Triangular filterbank with `n` bands whose edges are equally spaced on
/// the warped axis `scale` between 0 and `fmax`. Returns per-band weights
/// over spectrum bins.
fn filterbank(n: usize, n_bins: usize, bin_hz: f64, fmax: f64, scale: fn(f64) -> f64) -> Vec<Vec<f64>> {
    let top = scale(fmax);
    let edges: Vec<f64> = (0..n + 2).map(|i| top * i as f64 / (n + 1) as f64).collect();
    (0..n)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..n_bins)
                .map(|k| {
                    let z = scale(k as f64 * bin_hz);
                    if z > l && z <= c {
                        (z - l) / (c - l)
                    } else if z > c && z < r {
                        (r - z) / (r - c)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Perceptual loudness per frame: power spectrum of the input at its
/// original scale, 26 triangular Bark bands up to 8 kHz, each band
/// compressed by x^0.33, summed.
pub fn loudness_contour(frames: &Frames, pitch: &FrameSeries) -> FrameSeries {
    let spectra = Spectra::compute(frames);
    loudness_from(&spectra, frames, pitch)
}

fn loudness_from(spectra: &Spectra, frames: &Frames, pitch: &FrameSeries) -> FrameSeries {
    let mut out = frames.scaffold();
    out.voiced_mask = pitch.voiced_mask.clone();
    let n_bins = spectra.mags.first().map_or(0, Vec::len);
    let fmax = (frames.sample_rate as f64 / 2.0).min(8000.0);
    let bank = filterbank(N_AUDITORY_BANDS, n_bins, spectra.bin_hz, fmax, bark);
    let gain2 = frames.gain * frames.gain;
    for (i, row) in spectra.mags.iter().enumerate() {
        let total: f64 = bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(row).map(|(w, m)| w * m * m).sum::<f64>() * gain2;
                e.powf(LOUDNESS_EXPONENT)
            })
            .sum();
        out.values[i] = Some(total);
    }
    out
}

/// Per-frame spectral descriptors. Each field is a contour sharing the
/// pitch track's voicing mask.
#[derive(Debug, Clone)]
pub struct SpectralDescriptors {
    pub flux: FrameSeries,
    pub alpha_ratio: FrameSeries,
    pub hammarberg: FrameSeries,
    pub slope_0_500: FrameSeries,
    pub slope_500_1500: FrameSeries,
    pub h1_h2: FrameSeries,
    pub h1_a3: FrameSeries,
    pub mfcc: [FrameSeries; N_MFCC],
}

fn ratio_db(num: f64, den: f64, factor: f64) -> Option<f64> {
    (num > 0.0 && den > 0.0).then(|| factor * (num / den).log10())
}

pub fn spectral_descriptors(frames: &Frames, pitch: &FrameSeries, formants: &FormantTrack) -> SpectralDescriptors {
    let spectra = Spectra::compute(frames);
    let blank = || {
        let mut s = frames.scaffold();
        s.voiced_mask = pitch.voiced_mask.clone();
        s
    };
    let mut d = SpectralDescriptors {
        flux: blank(),
        alpha_ratio: blank(),
        hammarberg: blank(),
        slope_0_500: blank(),
        slope_500_1500: blank(),
        h1_h2: blank(),
        h1_a3: blank(),
        mfcc: std::array::from_fn(|_| blank()),
    };
    let n_bins = spectra.mags.first().map_or(0, Vec::len);
    let nyquist = frames.sample_rate as f64 / 2.0;
    let mel_bank = filterbank(N_MEL_BANDS, n_bins, spectra.bin_hz, nyquist.min(8000.0), mel);

    for i in 0..frames.n_frames {
        let row = &spectra.mags[i];
        d.flux.values[i] = if i == 0 {
            Some(0.0)
        } else {
            let prev = &spectra.mags[i - 1];
            let num: f64 = row.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum();
            let ea: f64 = row.iter().map(|a| a * a).sum();
            let eb: f64 = prev.iter().map(|b| b * b).sum();
            (ea > 0.0 && eb > 0.0).then(|| num / (ea * eb).sqrt())
        };
        d.alpha_ratio.values[i] = ratio_db(
            spectra.band_energy(i, 1000.0, 5000.0),
            spectra.band_energy(i, 50.0, 1000.0),
            10.0,
        );
        d.hammarberg.values[i] = ratio_db(
            spectra.band_max(i, 0.0, 2000.0),
            spectra.band_max(i, 2000.0, 5000.0),
            10.0,
        );
        d.slope_0_500.values[i] = spectra.slope(i, 0.0, 500.0);
        d.slope_500_1500.values[i] = spectra.slope(i, 500.0, 1500.0);

        if let Some(f0) = pitch.values[i] {
            let h1 = spectra.harmonic(i, f0);
            if 2.0 * f0 < nyquist {
                d.h1_h2.values[i] = ratio_db(h1, spectra.harmonic(i, 2.0 * f0), 20.0);
            }
            if let Some(ff) = formants.frame(i) {
                if let (Some(&f3), Some(&b3)) = (ff.frequencies.get(2), ff.bandwidths.get(2)) {
                    let lo = ((f3 - b3) / f0).ceil().max(1.0) as usize;
                    let hi = ((f3 + b3) / f0).floor() as usize;
                    let a3 = (lo..=hi)
                        .filter(|&h| (h as f64) * f0 < nyquist)
                        .map(|h| spectra.harmonic(i, h as f64 * f0))
                        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
                    d.h1_a3.values[i] = a3.and_then(|a3| ratio_db(h1, a3, 20.0));
                }
            }
        }

        let log_e: Vec<f64> = mel_bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(row).map(|(w, m)| w * m * m).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect();
        for (c, series) in d.mfcc.iter_mut().enumerate() {
            let k = (c + 1) as f64;
            let v: f64 = log_e
                .iter()
                .enumerate()
                .map(|(m, e)| e * (PI * k * (m as f64 + 0.5) / N_MEL_BANDS as f64).cos())
                .sum();
            series.values[i] = Some(v);
        }
    }
    d
}

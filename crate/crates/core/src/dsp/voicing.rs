use super::FrameSeries;
use crate::numeric::{mean, quantile, std_pop};

/// Fraction of the contour's 95th percentile a loudness peak must exceed.
const PEAK_FRACTION: f64 = 0.8;

/// Temporal structure of voicing, with run lengths in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VoicingStats {
    pub uvl_mean: f64,
    pub uvl_std: f64,
    pub voiced_len_mean: f64,
    pub voiced_len_std: f64,
    pub voiced_segments_per_sec: f64,
    pub loudness_peak_rate: f64,
}

/// Lengths (in frames) of maximal runs where `mask == value`.
fn runs(mask: &[bool], value: bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut len = 0;
    for &m in mask {
        if m == value {
            len += 1;
        } else if len > 0 {
            out.push(len);
            len = 0;
        }
    }
    if len > 0 {
        out.push(len);
    }
    out
}

fn stats(lengths: &[f64]) -> (f64, f64) {
    if lengths.is_empty() {
        (0.0, 0.0)
    } else {
        (mean(lengths), std_pop(lengths))
    }
}

pub fn voicing_structure(pitch: &FrameSeries, loudness: &FrameSeries, duration: f64) -> VoicingStats {
    let hop = pitch.frame_hop;
    let secs = |v: Vec<usize>| v.into_iter().map(|n| n as f64 * hop).collect::<Vec<f64>>();
    let voiced = secs(runs(&pitch.voiced_mask, true));
    let unvoiced = secs(runs(&pitch.voiced_mask, false));
    let (uvl_mean, uvl_std) = stats(&unvoiced);
    let (voiced_len_mean, voiced_len_std) = stats(&voiced);
    VoicingStats {
        uvl_mean,
        uvl_std,
        voiced_len_mean,
        voiced_len_std,
        voiced_segments_per_sec: voiced.len() as f64 / duration,
        loudness_peak_rate: loudness_peaks(loudness) as f64 / duration,
    }
}

/// Local maxima of the loudness contour above 0.8 x its 95th percentile.
fn loudness_peaks(loudness: &FrameSeries) -> usize {
    let x: Vec<f64> = loudness.values.iter().map(|v| v.unwrap_or(0.0)).collect();
    if x.len() < 3 {
        return 0;
    }
    let threshold = PEAK_FRACTION * quantile(&x, 0.95);
    (1..x.len() - 1)
        .filter(|&i| x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1])
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(mask: &[bool], values: Vec<Option<f64>>) -> FrameSeries {
        FrameSeries {
            values,
            voiced_mask: mask.to_vec(),
            frame_hop: 0.01,
            frame_length: 0.025,
        }
    }

    fn pitch(mask: &[bool]) -> FrameSeries {
        series(mask, mask.iter().map(|&v| v.then_some(200.0)).collect())
    }

    fn flat(n: usize) -> FrameSeries {
        series(&vec![false; n], vec![Some(1.0); n])
    }

    #[test]
    fn all_voiced() {
        let mask = vec![true; 100];
        let s = voicing_structure(&pitch(&mask), &flat(100), 1.0);
        assert_eq!(s.uvl_mean, 0.0);
        assert_eq!(s.voiced_segments_per_sec, 1.0);
    }

    #[test]
    fn mixed_runs() {
        let mask = [true, true, false, false, false, true];
        let s = voicing_structure(&pitch(&mask), &flat(6), 0.085);
        assert!((s.uvl_mean - 0.03).abs() < 1e-12);
        assert!((s.voiced_segments_per_sec * 0.085 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn silence_has_no_voiced_runs() {
        let mask = vec![false; 50];
        let s = voicing_structure(&pitch(&mask), &series(&mask, vec![Some(0.0); 50]), 0.5);
        assert_eq!(s.voiced_segments_per_sec, 0.0);
        assert_eq!(s.loudness_peak_rate, 0.0);
    }

    #[test]
    fn counts_loudness_peaks() {
        let vals: Vec<Option<f64>> = (0..100).map(|i| Some(if i % 20 == 10 { 5.0 } else { 1.0 })).collect();
        let s = voicing_structure(&pitch(&vec![true; 100]), &series(&vec![true; 100], vals), 1.0);
        assert_eq!(s.loudness_peak_rate, 5.0);
    }
}

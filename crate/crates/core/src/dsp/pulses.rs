use super::{FrameSeries, Frames};

/// Periods outside this range (seconds) are treated as voicing breaks and
/// split the pulse train into independent chains.
const PERIOD_FLOOR: f64 = 1e-4;
const PERIOD_CEILING: f64 = 0.02;
/// Successive pulses are searched within +-20% of the local period.
const SEARCH_TOLERANCE: f64 = 0.2;
const MIN_PULSES: usize = 5;
const MIN_PULSES_APQ11: usize = 11;

/// Glottal pulse instants (seconds, strictly increasing) and peak absolute
/// amplitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTrain {
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl PulseTrain {
    pub fn new(times: Vec<f64>, amplitudes: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), amplitudes.len());
        PulseTrain { times, amplitudes }
    }

    /// Pulses at the given instants with unit amplitude.
    pub fn from_times(times: Vec<f64>) -> Self {
        let amplitudes = vec![1.0; times.len()];
        PulseTrain { times, amplitudes }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index ranges of maximal runs of pulses separated by plausible periods.
    fn chains(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.times.len() {
            let broken = i == self.times.len() || {
                let p = self.times[i] - self.times[i - 1];
                !(PERIOD_FLOOR..=PERIOD_CEILING).contains(&p)
            };
            if broken {
                if i > start {
                    out.push(start..i);
                }
                start = i;
            }
        }
        out
    }

    fn period_chains(&self) -> Vec<Vec<f64>> {
        self.chains()
            .into_iter()
            .map(|r| self.times[r].windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
            .filter(|p: &Vec<f64>| !p.is_empty())
            .collect()
    }

    fn amplitude_chains(&self) -> Vec<Vec<f64>> {
        self.chains()
            .into_iter()
            .filter(|r| r.len() >= 2)
            .map(|r| self.amplitudes[r].to_vec())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jitter {
    pub local: Option<f64>,
    pub local_abs: Option<f64>,
    pub rap: Option<f64>,
    pub ppq5: Option<f64>,
    pub ddp: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Shimmer {
    pub local: Option<f64>,
    pub apq3: Option<f64>,
    pub apq5: Option<f64>,
    pub apq11: Option<f64>,
    pub dda: Option<f64>,
}

fn mean_of(chains: &[Vec<f64>]) -> Option<f64> {
    let n: usize = chains.iter().map(Vec::len).sum();
    (n > 0).then(|| chains.iter().flatten().sum::<f64>() / n as f64)
}

/// Mean |x[i+1] - x[i]| over consecutive pairs inside each chain.
fn mean_abs_diff(chains: &[Vec<f64>]) -> Option<f64> {
    let terms: Vec<f64> = chains
        .iter()
        .flat_map(|c| c.windows(2).map(|w| (w[1] - w[0]).abs()))
        .collect();
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Mean |x[i] - mean(x[i-h..=i+h])| over all full centered windows of odd
/// width `width` inside each chain.
fn mean_abs_dev(chains: &[Vec<f64>], width: usize) -> Option<f64> {
    let terms: Vec<f64> = chains
        .iter()
        .flat_map(|c| {
            c.windows(width).map(move |w| {
                let c = w[width / 2];
                (w.iter().map(|x| c - x).sum::<f64>() / width as f64).abs()
            })
        })
        .collect();
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Period perturbation measures. Needs at least five pulses; variants whose
/// window does not fit are missing.
pub fn jitter_features(pulses: &PulseTrain) -> Jitter {
    if pulses.len() < MIN_PULSES {
        return Jitter::default();
    }
    let periods = pulses.period_chains();
    let Some(mean_period) = mean_of(&periods) else {
        return Jitter::default();
    };
    let local_abs = mean_abs_diff(&periods);
    let rap = mean_abs_dev(&periods, 3).map(|v| v / mean_period);
    Jitter {
        local: local_abs.map(|v| v / mean_period),
        local_abs,
        rap,
        ppq5: mean_abs_dev(&periods, 5).map(|v| v / mean_period),
        ddp: rap.map(|v| 3.0 * v),
    }
}

/// Amplitude perturbation measures, the amplitude analogs of the jitter
/// family. apq11 needs at least eleven pulses.
pub fn shimmer_features(pulses: &PulseTrain) -> Shimmer {
    if pulses.len() < MIN_PULSES {
        return Shimmer::default();
    }
    let amps = pulses.amplitude_chains();
    let Some(mean_amp) = mean_of(&amps).filter(|&m| m > 0.0) else {
        return Shimmer::default();
    };
    let apq3 = mean_abs_dev(&amps, 3).map(|v| v / mean_amp);
    Shimmer {
        local: mean_abs_diff(&amps).map(|v| v / mean_amp),
        apq3,
        apq5: mean_abs_dev(&amps, 5).map(|v| v / mean_amp),
        apq11: if pulses.len() >= MIN_PULSES_APQ11 {
            mean_abs_dev(&amps, 11).map(|v| v / mean_amp)
        } else {
            None
        },
        dda: apq3.map(|v| 3.0 * v),
    }
}

/// Maximum of |x| over `lo..hi`, refined by parabolic interpolation.
/// Returns (fractional sample position, peak absolute sample value).
fn abs_peak(x: &[f64], lo: usize, hi: usize) -> Option<(f64, f64)> {
    let (idx, amp) = (lo..hi)
        .map(|i| (i, x[i].abs()))
        .fold(None, |best: Option<(usize, f64)>, (i, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((i, a)),
        })?;
    if amp <= 0.0 {
        return None;
    }
    let mut pos = idx as f64;
    if idx > 0 && idx + 1 < x.len() {
        let (l, m, r) = (x[idx - 1].abs(), amp, x[idx + 1].abs());
        let denom = l - 2.0 * m + r;
        if denom < 0.0 {
            pos += (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    Some((pos, amp))
}

/// Locates glottal pulses inside voiced regions: the first at the largest
/// |x| within one period of the region start, each next one at the largest
/// |x| within +-20% of one local period after the previous pulse.
pub fn glottal_pulses(frames: &Frames, pitch: &FrameSeries) -> PulseTrain {
    let fs = frames.sample_rate as f64;
    let x = &frames.signal;
    let mut times = Vec::new();
    let mut amplitudes = Vec::new();
    let mut i = 0;
    while i < pitch.voiced_mask.len() {
        if !pitch.voiced_mask[i] {
            i += 1;
            continue;
        }
        let first = i;
        while i < pitch.voiced_mask.len() && pitch.voiced_mask[i] {
            i += 1;
        }
        let last = i - 1;
        let start = first * frames.hop;
        let end = (last * frames.hop + frames.frame_len).min(x.len());
        let period_at = |s: f64| {
            let j = ((s - frames.frame_len as f64 / 2.0) / frames.hop as f64).round();
            let j = (j.max(first as f64) as usize).min(last);
            fs / pitch.values[j].expect("voiced frame carries F0")
        };
        let p0 = period_at(start as f64);
        let Some(mut pulse) = abs_peak(x, start, (start + p0.ceil() as usize).min(end)) else {
            continue;
        };
        loop {
            times.push(pulse.0 / fs);
            amplitudes.push(pulse.1);
            let period = period_at(pulse.0);
            let lo = (pulse.0 + (1.0 - SEARCH_TOLERANCE) * period).round() as usize;
            let hi = (pulse.0 + (1.0 + SEARCH_TOLERANCE) * period).round() as usize + 1;
            if hi > end {
                break;
            }
            match abs_peak(x, lo, hi) {
                Some(next) if next.0 > pulse.0 => pulse = next,
                _ => break,
            }
        }
    }
    PulseTrain::new(times, amplitudes)
}

//! Formant-based vocal tract length estimators.

use crate::error::{Error, Result};

/// Speed of sound used by the dispersion-based length estimate, cm/s.
pub const SPEED_OF_SOUND_CM: f64 = 35_000.0;

/// Per-formant mean and standard deviation of a reference population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantPopulation {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl FormantPopulation {
    /// Population statistics (divisor n) of a set of formant quadruples.
    pub fn from_samples(samples: &[[f64; 4]]) -> Option<FormantPopulation> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for i in 0..4 {
            mean[i] = samples.iter().map(|f| f[i]).sum::<f64>() / n;
            std[i] = (samples.iter().map(|f| (f[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt();
        }
        Some(FormantPopulation { mean, std })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VtlEstimates {
    /// Formant dispersion, Hz.
    pub fdisp: f64,
    /// Arithmetic mean formant frequency, Hz.
    pub avg_f: f64,
    /// Geometric mean formant frequency, Hz.
    pub mff: f64,
    /// Vocal tract length from dispersion, cm.
    pub fitch_vtl: f64,
    /// Regression-through-origin formant spacing, Hz.
    pub delta_f: f64,
    /// Mean standardized formant position; needs a reference population.
    pub p_f: Option<f64>,
}

pub fn check_formants(f: &[f64; 4]) -> Result<()> {
    let ordered = f[0] > 0.0 && f.windows(2).all(|w| w[0] < w[1]) && f.iter().all(|x| x.is_finite());
    if ordered {
        Ok(())
    } else {
        Err(Error::FormantOrdering(format!("{f:?}")))
    }
}

/// Formant position: mean z-score of F1..F4 against the population.
pub fn formant_position(f: &[f64; 4], population: &FormantPopulation) -> Result<f64> {
    if population.std.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("formant population has zero standard deviation"));
    }
    Ok((0..4).map(|i| (f[i] - population.mean[i]) / population.std[i]).sum::<f64>() / 4.0)
}

/// The six estimators from mean F1..F4 (Hz).
pub fn vtl_vector(f: &[f64; 4], population: Option<&FormantPopulation>) -> Result<VtlEstimates> {
    check_formants(f)?;
    let fdisp = (f[3] - f[0]) / 3.0;
    let (num, den) = (0..4).fold((0.0, 0.0), |(num, den), i| {
        let m = (2 * i + 1) as f64 / 2.0;
        (num + f[i] * m, den + m * m)
    });
    Ok(VtlEstimates {
        fdisp,
        avg_f: f.iter().sum::<f64>() / 4.0,
        mff: f.iter().product::<f64>().powf(0.25),
        fitch_vtl: SPEED_OF_SOUND_CM / (2.0 * fdisp),
        delta_f: num / den,
        p_f: population.map(|p| formant_position(f, p)).transpose()?,
    })
}

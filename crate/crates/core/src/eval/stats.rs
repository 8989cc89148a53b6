//! Welch t-test, Cohen's d and per-age feature statistics. Signs follow
//! girls minus boys: negative values mean the feature is larger in boys.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::corpus::Sex;
use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::numeric::{mean, var_sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchT {
    pub t: f64,
    pub df: f64,
    pub p_two_tailed: f64,
}

fn check_sample(xs: &[f64], which: &str) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::insufficient(format!("{which} has {} values, need at least 2", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{which} contains non-finite values")));
    }
    Ok(())
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchT> {
    check_sample(a, "first sample")?;
    check_sample(b, "second sample")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (var_sample(a) / na, var_sample(b) / nb);
    if sa == 0.0 && sb == 0.0 {
        return Err(Error::invalid("both samples have zero variance"));
    }
    let se = (sa + sb).sqrt();
    let t = (mean(a) - mean(b)) / se;
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchT {
        t,
        df,
        p_two_tailed: t_two_tailed_p(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectBand {
    Small,
    SmallMedium,
    MediumLarge,
    Large,
}

impl EffectBand {
    pub fn of(d: f64) -> EffectBand {
        match d.abs() {
            x if x < 0.2 => EffectBand::Small,
            x if x < 0.5 => EffectBand::SmallMedium,
            x if x < 0.8 => EffectBand::MediumLarge,
            _ => EffectBand::Large,
        }
    }
}

impl fmt::Display for EffectBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectBand::Small => "small",
            EffectBand::SmallMedium => "small-medium",
            EffectBand::MediumLarge => "medium-large",
            EffectBand::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohensD {
    pub d: f64,
    pub band: EffectBand,
}

/// Standardized mean difference with the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<CohensD> {
    check_sample(a, "first sample")?;
    check_sample(b, "second sample")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * var_sample(a) + (nb - 1.0) * var_sample(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(Error::invalid("zero pooled variance"));
    }
    let d = (mean(a) - mean(b)) / pooled;
    Ok(CohensD {
        d,
        band: EffectBand::of(d),
    })
}

/// One line of the statistics table; the test fields are `None` when the
/// age group lacks one sex or the values are degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub age: u8,
    pub feature: String,
    pub n_girls: usize,
    pub n_boys: usize,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub d: Option<f64>,
    pub band: Option<EffectBand>,
}

/// Girls-vs-boys statistics per (age, feature) over per-sample values.
pub fn feature_stats(rows: &[FeatureRow], ages: &[u8], names: &[&str]) -> Vec<StatRow> {
    let mut out = Vec::new();
    for &age in ages {
        for &name in names {
            let values = |s: Sex| -> Vec<f64> {
                rows.iter()
                    .filter(|r| r.key.age == age && r.key.sex == s)
                    .filter_map(|r| r.features.get(name))
                    .collect()
            };
            let (g, b) = (values(Sex::F), values(Sex::M));
            let t = welch_t(&g, &b).ok();
            let d = cohens_d(&g, &b).ok();
            out.push(StatRow {
                age,
                feature: name.to_string(),
                n_girls: g.len(),
                n_boys: b.len(),
                t: t.map(|w| w.t),
                p: t.map(|w| w.p_two_tailed),
                d: d.map(|c| c.d),
                band: d.map(|c| c.band),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// P(|T| > t) by Simpson integration of the unnormalized t kernel, with
    /// x = u / (1 - u) mapping [0, inf) onto [0, 1).
    fn oracle_p(t: f64, df: f64) -> f64 {
        let kernel = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = u / (1.0 - u);
            (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / ((1.0 - u) * (1.0 - u))
        };
        let simpson = |a: f64, b: f64| {
            let n = 200_000;
            let h = (b - a) / n as f64;
            let mut s = kernel(a) + kernel(b);
            for i in 1..n {
                s += kernel(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let u0 = t.abs() / (1.0 + t.abs());
        simpson(u0, 1.0) / simpson(0.0, 1.0)
    }

    #[test]
    fn p_value_matches_integration() {
        for (t, df) in [(2.0, 10.0), (0.7, 4.5), (3.1, 25.0)] {
            let ours = t_two_tailed_p(t, df);
            let oracle = oracle_p(t, df);
            assert!((ours - oracle).abs() < 1e-6, "t={t} df={df}: {ours} vs {oracle}");
        }
        assert!((t_two_tailed_p(2.0, 10.0) - 0.0734).abs() < 1e-4);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let w = welch_t(&a, &a).unwrap();
        assert_eq!((w.t, w.p_two_tailed), (0.0, 1.0));
        let c = cohens_d(&a, &a).unwrap();
        assert_eq!((c.d, c.band), (0.0, EffectBand::Small));
    }

    #[test]
    fn unit_effect_is_large() {
        // means 1 and 0, each with sample variance 1
        let a = [0.0, 1.0, 2.0];
        let b = [-1.0, 0.0, 1.0];
        let c = cohens_d(&a, &b).unwrap();
        assert_eq!((c.d, c.band), (1.0, EffectBand::Large));
    }

    #[test]
    fn bands() {
        assert_eq!(EffectBand::of(-0.19), EffectBand::Small);
        assert_eq!(EffectBand::of(0.2), EffectBand::SmallMedium);
        assert_eq!(EffectBand::of(-0.5), EffectBand::MediumLarge);
        assert_eq!(EffectBand::of(0.8), EffectBand::Large);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn swap_negates_t_keeps_p(
            a in prop::collection::vec(-10.0..10.0f64, 2..20),
            b in prop::collection::vec(-10.0..10.0f64, 2..20),
        ) {
            if let (Ok(x), Ok(y)) = (welch_t(&a, &b), welch_t(&b, &a)) {
                prop_assert!((x.t + y.t).abs() < 1e-12);
                prop_assert!((x.p_two_tailed - y.p_two_tailed).abs() < 1e-12);
                prop_assert!(x.p_two_tailed > 0.0 && x.p_two_tailed <= 1.0);
            }
        }

        #[test]
        fn d_is_translation_and_scale_invariant(
            a in prop::collection::vec(-10.0..10.0f64, 2..20),
            b in prop::collection::vec(-10.0..10.0f64, 2..20),
            shift in -100.0..100.0f64,
            scale in 0.1..10.0f64,
        ) {
            if let Ok(d0) = cohens_d(&a, &b) {
                let tr = |xs: &[f64]| xs.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
                let d1 = cohens_d(&tr(&a), &tr(&b)).unwrap();
                prop_assert!((d0.d - d1.d).abs() < 1e-9 * d0.d.abs().max(1.0));
            }
        }

        #[test]
        fn p_decreases_with_abs_t(df in 1.0..60.0f64, t in 0.0..8.0f64, dt in 0.01..2.0f64) {
            prop_assert!(t_two_tailed_p(t + dt, df) <= t_two_tailed_p(t, df));
        }
    }
}

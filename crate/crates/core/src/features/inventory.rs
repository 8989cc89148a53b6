//! The canonical feature inventory. Order is significant: every feature
//! vector, matrix and CSV lists its columns in this order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Bumped whenever names or order change.
pub const INVENTORY_VERSION: u32 = 1;

/// Functional (eGeMAPS-style) set.
pub const FUNCTIONAL: [&str; 65] = [
    "F0_mean",
    "F0_std",
    "F0_p20",
    "F0_p50",
    "F0_p80",
    "loudness_mean",
    "loudness_std",
    "loudness_p20",
    "loudness_p50",
    "loudness_p80",
    "flux_mean",
    "flux_std",
    "flux_V_mean",
    "flux_UV_mean",
    "alpha_ratio_mean",
    "alpha_ratio_std",
    "alpha_ratio_V_mean",
    "alpha_ratio_UV_mean",
    "hammarberg_mean",
    "hammarberg_std",
    "hammarberg_V_mean",
    "hammarberg_UV_mean",
    "slope_0_500_mean",
    "slope_0_500_std",
    "slope_0_500_V_mean",
    "slope_0_500_UV_mean",
    "slope_500_1500_mean",
    "slope_500_1500_std",
    "H1_H2_mean",
    "H1_H2_std",
    "H1_A3_mean",
    "H1_A3_std",
    "mfcc1_mean",
    "mfcc1_std",
    "mfcc1_V_mean",
    "mfcc2_mean",
    "mfcc2_std",
    "mfcc2_V_mean",
    "mfcc3_mean",
    "mfcc3_std",
    "mfcc3_V_mean",
    "mfcc4_mean",
    "mfcc4_std",
    "mfcc4_V_mean",
    "F1_mean",
    "F1_std",
    "F1_bw_mean",
    "F1_bw_std",
    "F2_mean",
    "F2_std",
    "F2_bw_mean",
    "F2_bw_std",
    "F3_mean",
    "F3_std",
    "F3_bw_mean",
    "F3_bw_std",
    "jitter_local",
    "shimmer_local",
    "HNR",
    "loudness_peak_rate",
    "voiced_segments_per_sec",
    "voiced_len_mean",
    "voiced_len_std",
    "UVL_mean",
    "UVL_std",
];

/// Perturbation and formant measures of the classic acoustic set that the
/// functional set does not already carry.
pub const CLASSIC_ONLY: [&str; 9] = [
    "jitter_local_abs",
    "jitter_rap",
    "jitter_ppq5",
    "jitter_ddp",
    "shimmer_apq3",
    "shimmer_apq5",
    "shimmer_apq11",
    "shimmer_dda",
    "F4_mean",
];

/// Vocal tract length estimators.
pub const VTL: [&str; 6] = ["fdisp", "avgF", "mff", "fitch_vtl", "delta_f", "pF"];

/// The classic 23-feature acoustic set, in its conventional listing order.
pub const CLASSIC: [&str; 23] = [
    "F0_mean",
    "F0_std",
    "HNR",
    "jitter_local",
    "jitter_local_abs",
    "jitter_rap",
    "jitter_ppq5",
    "jitter_ddp",
    "shimmer_local",
    "shimmer_apq3",
    "shimmer_apq5",
    "shimmer_apq11",
    "shimmer_dda",
    "F1_mean",
    "F2_mean",
    "F3_mean",
    "F4_mean",
    "fdisp",
    "avgF",
    "mff",
    "fitch_vtl",
    "delta_f",
    "pF",
];

/// Full inventory: functional set, classic-only extras, VTL estimators.
pub fn inventory() -> &'static [&'static str] {
    static ALL: std::sync::OnceLock<Vec<&'static str>> = std::sync::OnceLock::new();
    ALL.get_or_init(|| {
        FUNCTIONAL
            .iter()
            .chain(CLASSIC_ONLY.iter())
            .chain(VTL.iter())
            .copied()
            .collect()
    })
}

/// Position of `name` in the inventory.
pub fn inventory_index(name: &str) -> Option<usize> {
    inventory().iter().position(|n| *n == name)
}

/// Interns a feature name against the inventory.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    inventory().iter().copied().find(|n| *n == name)
}

/// The inventory file: a version line followed by one name per line.
pub fn inventory_file() -> String {
    let mut s = format!("# feature inventory v{INVENTORY_VERSION}\n");
    for n in inventory() {
        s.push_str(n);
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// Classic acoustic features (23).
    Af,
    /// Functional eGeMAPS-style set.
    Eg,
    /// Functional set plus the six VTL estimators.
    EgVtl,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Af, FeatureSet::Eg, FeatureSet::EgVtl];

    /// Member names in canonical inventory order.
    pub fn names(self) -> Vec<&'static str> {
        let member = |n: &&&str| match self {
            FeatureSet::Af => CLASSIC.contains(*n),
            FeatureSet::Eg => FUNCTIONAL.contains(*n),
            FeatureSet::EgVtl => FUNCTIONAL.contains(*n) || VTL.contains(*n),
        };
        inventory().iter().filter(member).copied().collect()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Af => "af",
            FeatureSet::Eg => "eg",
            FeatureSet::EgVtl => "eg_vtl",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "af" => Ok(FeatureSet::Af),
            "eg" | "egemaps" => Ok(FeatureSet::Eg),
            "eg_vtl" | "egemaps_vtl" => Ok(FeatureSet::EgVtl),
            other => Err(format!("unknown feature set {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique() {
        let set: HashSet<_> = inventory().iter().collect();
        assert_eq!(set.len(), inventory().len());
    }

    #[test]
    fn set_sizes() {
        assert_eq!(FeatureSet::Af.names().len(), 23);
        assert_eq!(FeatureSet::Eg.names().len(), FUNCTIONAL.len());
        assert_eq!(FeatureSet::EgVtl.names().len(), FUNCTIONAL.len() + 6);
    }

    #[test]
    fn classic_names_are_in_inventory() {
        for n in CLASSIC {
            assert!(inventory_index(n).is_some(), "{n}");
        }
    }

    #[test]
    fn inventory_file_lists_every_name() {
        let text = inventory_file();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), inventory().len());
    }
}

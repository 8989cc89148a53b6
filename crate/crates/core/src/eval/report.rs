//! Flat CSV views of an evaluation report.

use std::io::Write;

use super::experiment::{Cell, CellOutcome, EvaluationReport};
use super::stats::StatRow;
use crate::error::{Error, Result};

const NA: &str = "NA";

fn opt(v: Option<f64>) -> String {
    v.map_or(NA.to_string(), |x| format!("{x:?}"))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<report csv>", e))
}

pub const SCORES_HEADER: [&str; 13] = [
    "group",
    "feature_set",
    "speech_type",
    "clustering",
    "F1_G",
    "F1_B",
    "mean_F1",
    "n_factors",
    "weighted_F1",
    "grouping",
    "n_girls",
    "n_boys",
    "status",
];

pub fn write_scores_csv<W: Write>(writer: W, cells: &[Cell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORES_HEADER)?;
    for c in cells {
        let k = &c.key;
        let mut rec = vec![k.group.clone(), k.feature_set.to_string(), k.speech_type.to_string(), k.clustering.to_string()];
        match &c.outcome {
            CellOutcome::Scored(r) => rec.extend([
                opt(r.f1_girls),
                opt(r.f1_boys),
                opt(Some(r.mean_f1)),
                r.n_factors.to_string(),
                opt(Some(r.weighted_f1)),
                k.grouping.to_string(),
                r.n_subjects[0].to_string(),
                r.n_subjects[1].to_string(),
                "ok".to_string(),
            ]),
            CellOutcome::Insufficient { .. } => {
                rec.extend([NA, NA, NA, NA, NA].map(String::from));
                rec.push(k.grouping.to_string());
                rec.extend([NA, NA, "insufficient"].map(String::from));
            }
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

pub const IMPORTANCE_HEADER: [&str; 8] =
    ["group", "factor", "members", "weight", "feature_set", "speech_type", "clustering", "grouping"];

/// One line per factor of every scored cell, heaviest first.
pub fn write_importance_csv<W: Write>(writer: W, cells: &[Cell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(IMPORTANCE_HEADER)?;
    for c in cells {
        let Some(r) = c.result() else { continue };
        let mut entries: Vec<_> = r.importance.iter().collect();
        entries.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        for e in entries {
            w.write_record([
                c.key.group.clone(),
                e.factor.clone(),
                e.members.join(";"),
                format!("{:?}", e.weight),
                c.key.feature_set.to_string(),
                c.key.speech_type.to_string(),
                c.key.clustering.to_string(),
                c.key.grouping.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub const STATS_HEADER: [&str; 8] = ["age", "feature", "t", "p", "d", "band", "n_girls", "n_boys"];

pub fn write_stats_csv<W: Write>(writer: W, rows: &[StatRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STATS_HEADER)?;
    for r in rows {
        w.write_record([
            r.age.to_string(),
            r.feature.clone(),
            opt(r.t),
            opt(r.p),
            opt(r.d),
            r.band.map_or(NA.to_string(), |b| b.to_string()),
            r.n_girls.to_string(),
            r.n_boys.to_string(),
        ])?;
    }
    finish(w)
}

/// Fixed-width scores table for the terminal.
pub fn format_scores_table(report: &EvaluationReport) -> String {
    let f = |v: Option<f64>| v.map_or("   NA".to_string(), |x| format!("{x:5.3}"));
    let mut s = format!(
        "{:<9} {:<7} {:<7} {:<12} {:<3} {:>5} {:>5} {:>6} {:>3}\n",
        "grouping", "group", "set", "speech", "cl", "F1_G", "F1_B", "mean", "n"
    );
    for c in &report.cells {
        let k = &c.key;
        let tail = match c.result() {
            Some(r) => format!("{} {} {:>6} {:>3}", f(r.f1_girls), f(r.f1_boys), f(Some(r.mean_f1)), r.n_factors),
            None => "insufficient data".to_string(),
        };
        s.push_str(&format!(
            "{:<9} {:<7} {:<7} {:<12} {:<3} {tail}\n",
            k.grouping.to_string(),
            k.group,
            k.feature_set.to_string(),
            k.speech_type.to_string(),
            k.clustering.to_string()
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stats_has_header_only() {
        let mut buf = Vec::new();
        write_stats_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "age,feature,t,p,d,band,n_girls,n_boys\n");
    }
}

//! Feature CSV reading and writing.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::features::{canonical_name, FeatureRow, FeatureVector, SampleKey};

/// Leading identity columns of every feature CSV.
pub const FEATURE_CSV_KEYS: [&str; 5] = ["subject_id", "age", "sex", "speech_type", "segment_index"];

const MISSING: &str = "NA";

/// Writes rows under `names`. Values use the shortest representation that
/// reloads bit-exactly; missing values are written as `NA`.
pub fn write_feature_csv<W: Write>(writer: W, names: &[&str], rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = FEATURE_CSV_KEYS.iter().chain(names.iter()).copied().collect();
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.key.subject_id.clone(),
            r.key.age.to_string(),
            r.key.sex.to_string(),
            r.key.speech_type.to_string(),
            r.key.segment_index.to_string(),
        ];
        rec.extend(names.iter().map(|n| match r.features.get(n) {
            Some(v) => format!("{v:?}"),
            None => MISSING.to_string(),
        }));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

/// Reads a feature CSV. Returns the feature column names (canonical order
/// is required) and the rows.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<(Vec<&'static str>, Vec<FeatureRow>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let bad_header = |message: String| Error::FeatureCsv { row: 1, message };
    if header.len() < FEATURE_CSV_KEYS.len() || header.iter().take(5).ne(FEATURE_CSV_KEYS.iter().copied()) {
        return Err(bad_header(format!("header must start with {}", FEATURE_CSV_KEYS.join(","))));
    }
    let names: Vec<&'static str> = header
        .iter()
        .skip(5)
        .map(|n| canonical_name(n).ok_or_else(|| bad_header(format!("unknown feature {n:?}"))))
        .collect::<Result<_>>()?;
    let positions: Vec<usize> = names
        .iter()
        .map(|n| super::inventory_index(n).unwrap_or(usize::MAX))
        .collect();
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad_header("feature columns are duplicated or out of canonical order".into()));
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::FeatureCsv { row, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(bad(format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        if rec[0].is_empty() {
            return Err(bad("empty subject_id".into()));
        }
        let key = SampleKey {
            subject_id: rec[0].to_string(),
            age: crate::corpus::parse_age(&rec[1]).map_err(bad)?,
            sex: rec[2].parse().map_err(bad)?,
            speech_type: rec[3].parse().map_err(bad)?,
            segment_index: rec[4]
                .parse()
                .map_err(|_| bad(format!("segment_index is not an integer: {:?}", &rec[4])))?,
        };
        let mut features = FeatureVector::missing(&names);
        for (j, n) in names.iter().enumerate() {
            let raw = &rec[5 + j];
            if raw == MISSING || raw.is_empty() {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("{n}: not a number: {raw:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{n}: non-finite value {raw:?}")));
            }
            features.set(n, Some(v));
        }
        rows.push(FeatureRow { key, features });
    }
    Ok((names, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sex, SpeechType};
    use crate::features::{inventory, FeatureSet};
    use proptest::prelude::*;

    fn sample_rows(values: &[Vec<Option<f64>>], names: &[&'static str]) -> Vec<FeatureRow> {
        values
            .iter()
            .enumerate()
            .map(|(i, vals)| {
                let mut fv = FeatureVector::missing(names);
                for (n, v) in names.iter().zip(vals) {
                    fv.set(n, *v);
                }
                FeatureRow {
                    key: SampleKey {
                        subject_id: format!("subj,{i}"),
                        age: 5 + (i % 11) as u8,
                        sex: if i % 2 == 0 { Sex::F } else { Sex::M },
                        speech_type: SpeechType::Spontaneous,
                        segment_index: i,
                    },
                    features: fv,
                }
            })
            .collect()
    }

    #[test]
    fn header_layout() {
        let names = FeatureSet::Af.names();
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &names, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("subject_id,age,sex,speech_type,segment_index,F0_mean,F0_std,"));
    }

    #[test]
    fn rejects_unknown_and_reordered_columns() {
        let unknown = "subject_id,age,sex,speech_type,segment_index,bogus\n";
        assert!(read_feature_csv(unknown.as_bytes()).is_err());
        let reordered = "subject_id,age,sex,speech_type,segment_index,F0_std,F0_mean\n";
        assert!(read_feature_csv(reordered.as_bytes()).is_err());
    }

    #[test]
    fn reports_bad_row_number() {
        let text = "subject_id,age,sex,speech_type,segment_index,F0_mean\na,9,F,scripted,0,1.5\nb,9,X,scripted,0,1.5\n";
        match read_feature_csv(text.as_bytes()) {
            Err(Error::FeatureCsv { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            values in prop::collection::vec(
                prop::collection::vec(prop::option::of(-1e12..1e12f64), 80), 0..8)
        ) {
            let names = inventory().to_vec();
            let rows = sample_rows(&values, &names);
            let mut buf = Vec::new();
            write_feature_csv(&mut buf, &names, &rows).unwrap();
            let (read_names, back) = read_feature_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(read_names, names);
            prop_assert_eq!(back, rows);
        }
    }
}

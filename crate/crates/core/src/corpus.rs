//! Corpus ingestion: manifest CSV, WAV loading, quality filtering,
//! fixed-window segmentation and age grouping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const MIN_AGE: u8 = 5;
pub const MAX_AGE: u8 = 15;

pub const MANIFEST_HEADER: [&str; 6] = [
    "subject_id",
    "age",
    "sex",
    "speech_type",
    "quality",
    "audio_path",
];

/// Class label. The declaration order is the canonical class order used by
/// every tie-break rule (F before M).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::F, Sex::M];

    pub fn index(self) -> usize {
        match self {
            Sex::F => 0,
            Sex::M => 1,
        }
    }

    pub fn from_index(i: usize) -> Sex {
        if i == 0 {
            Sex::F
        } else {
            Sex::M
        }
    }

    pub fn other(self) -> Sex {
        match self {
            Sex::F => Sex::M,
            Sex::M => Sex::F,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::F => "F",
            Sex::M => "M",
        })
    }
}

impl FromStr for Sex {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "F" => Ok(Sex::F),
            "M" => Ok(Sex::M),
            other => Err(format!("unknown sex token {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeechType {
    Scripted,
    Spontaneous,
}

impl fmt::Display for SpeechType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeechType::Scripted => "scripted",
            SpeechType::Spontaneous => "spontaneous",
        })
    }
}

impl FromStr for SpeechType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scripted" => Ok(SpeechType::Scripted),
            "spontaneous" => Ok(SpeechType::Spontaneous),
            other => Err(format!("unknown speech type {other:?}")),
        }
    }
}

/// Utterance rating. Spontaneous recordings are unrated (`Na`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Good,
    Questionable,
    Bad,
    Na,
}

impl FromStr for Quality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "good" => Ok(Quality::Good),
            "questionable" => Ok(Quality::Questionable),
            "bad" => Ok(Quality::Bad),
            "na" => Ok(Quality::Na),
            other => Err(format!("unknown quality token {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub age: u8,
    pub sex: Sex,
    pub speech_type: SpeechType,
    pub quality: Quality,
    pub audio_path: PathBuf,
}

/// Mono PCM audio in the range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PcmBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl PcmBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        PcmBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Audio(PcmBuffer),
    Features(FeatureVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub subject_id: String,
    pub age: u8,
    pub sex: Sex,
    pub speech_type: SpeechType,
    pub segment_index: usize,
    pub payload: Payload,
}

/// Anything that can be bucketed by age.
pub trait Aged {
    fn age(&self) -> u8;
}

impl Aged for Sample {
    fn age(&self) -> u8 {
        self.age
    }
}

impl Aged for ManifestEntry {
    fn age(&self) -> u8 {
        self.age
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgeGroup {
    pub label: String,
    pub ages: BTreeSet<u8>,
}

impl AgeGroup {
    pub fn year(age: u8) -> Self {
        AgeGroup {
            label: age.to_string(),
            ages: BTreeSet::from([age]),
        }
    }

    pub fn band(lo: u8, hi: u8) -> Self {
        AgeGroup {
            label: format!("{lo}-{hi}"),
            ages: (lo..=hi).collect(),
        }
    }

    /// The three canonical bands: 5-8, 9-12, 13-15.
    pub fn canonical_bands() -> [AgeGroup; 3] {
        [
            AgeGroup::band(5, 8),
            AgeGroup::band(9, 12),
            AgeGroup::band(13, 15),
        ]
    }

    pub fn contains(&self, age: u8) -> bool {
        self.ages.contains(&age)
    }
}

impl Ord for AgeGroup {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ages
            .iter()
            .cmp(other.ages.iter())
            .then_with(|| self.label.cmp(&other.label))
    }
}

impl PartialOrd for AgeGroup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    PerYear,
    PerBand,
}

impl FromStr for GroupingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "per_year" => Ok(GroupingMode::PerYear),
            "per_band" => Ok(GroupingMode::PerBand),
            other => Err(format!("unknown grouping {other:?}")),
        }
    }
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingMode::PerYear => "per_year",
            GroupingMode::PerBand => "per_band",
        })
    }
}

fn check_age(age: u8) -> Result<u8, String> {
    if (MIN_AGE..=MAX_AGE).contains(&age) {
        Ok(age)
    } else {
        Err(format!("age out of range [{MIN_AGE},{MAX_AGE}]: {age}"))
    }
}

pub(crate) fn parse_age(raw: &str) -> Result<u8, String> {
    let age: i64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("age is not an integer: {raw:?}"))?;
    u8::try_from(age)
        .map_err(|_| format!("age out of range [{MIN_AGE},{MAX_AGE}]: {age}"))
        .and_then(check_age)
}

/// Reads a manifest CSV. Relative audio paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = parse_manifest(file)?;
    for e in &mut entries {
        if e.audio_path.is_relative() {
            e.audio_path = base.join(&e.audio_path);
        }
    }
    Ok(entries)
}

/// Parses manifest CSV text from any reader; paths are kept verbatim.
pub fn parse_manifest<R: std::io::Read>(reader: R) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(Error::Manifest {
            row: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Manifest {
            row,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Manifest { row, message };
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(bad(format!("expected 6 fields, found {}", rec.len())));
        }
        let subject_id = rec[0].to_string();
        if subject_id.is_empty() {
            return Err(bad("empty subject_id".into()));
        }
        let audio_path = PathBuf::from(&rec[5]);
        if rec[5].is_empty() {
            return Err(bad("empty audio_path".into()));
        }
        out.push(ManifestEntry {
            subject_id,
            age: parse_age(&rec[1]).map_err(bad)?,
            sex: rec[2].parse().map_err(bad)?,
            speech_type: rec[3].parse().map_err(bad)?,
            quality: rec[4].parse().map_err(bad)?,
            audio_path,
        });
    }
    Ok(out)
}

/// Keeps good-rated utterances. Spontaneous entries carry no rating and
/// always pass.
pub fn filter_quality(entries: &[ManifestEntry]) -> Vec<ManifestEntry> {
    entries
        .iter()
        .filter(|e| e.speech_type == SpeechType::Spontaneous || e.quality == Quality::Good)
        .cloned()
        .collect()
}

/// Loads a 16-bit PCM WAV file, downmixing multichannel audio by averaging.
pub fn read_wav(path: &Path) -> Result<PcmBuffer> {
    let reader =
        hound::WavReader::open(path).map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio(format!(
            "{}: only 16-bit linear PCM is supported",
            path.display()
        )));
    }
    let channels = spec.channels as usize;
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
    let samples = raw
        .chunks(channels)
        .map(|frame| frame.iter().map(|&s| f64::from(s) / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    Ok(PcmBuffer::new(samples, spec.sample_rate))
}

/// Writes mono 16-bit PCM. Values are clipped to [-1, 1].
pub fn write_wav(path: &Path, audio: &PcmBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let audio_err = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, spec).map_err(audio_err)?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(audio_err)?;
    }
    w.finalize().map_err(audio_err)
}

/// One fixed-length window of a longer recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start_seconds: f64,
    pub audio: PcmBuffer,
}

/// Splits a recording into consecutive non-overlapping windows starting at
/// time 0. A trailing remainder is kept iff it lasts at least half a window.
pub fn segment_recording(audio: &PcmBuffer, window_seconds: f64) -> Result<Vec<Segment>> {
    if audio.samples.is_empty() {
        return Err(Error::invalid("empty audio buffer"));
    }
    if !(window_seconds > 0.0) || audio.sample_rate == 0 {
        return Err(Error::invalid("segment window and sample rate must be positive"));
    }
    let win = (window_seconds * audio.sample_rate as f64).round() as usize;
    let win = win.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < audio.samples.len() {
        let end = (start + win).min(audio.samples.len());
        let len = end - start;
        if len < win && 2 * len < win {
            break;
        }
        out.push(Segment {
            index: out.len(),
            start_seconds: start as f64 / audio.sample_rate as f64,
            audio: PcmBuffer::new(audio.samples[start..end].to_vec(), audio.sample_rate),
        });
        start = end;
    }
    Ok(out)
}

/// Turns a manifest entry's recording into samples. Spontaneous speech is
/// windowed; scripted utterances stay whole.
pub fn samples_from_recording(
    entry: &ManifestEntry,
    audio: PcmBuffer,
    window_seconds: f64,
) -> Result<Vec<Sample>> {
    let make = |segment_index, audio| Sample {
        subject_id: entry.subject_id.clone(),
        age: entry.age,
        sex: entry.sex,
        speech_type: entry.speech_type,
        segment_index,
        payload: Payload::Audio(audio),
    };
    match entry.speech_type {
        SpeechType::Scripted => {
            if audio.samples.is_empty() {
                return Err(Error::invalid("empty audio buffer"));
            }
            Ok(vec![make(0, audio)])
        }
        SpeechType::Spontaneous => Ok(segment_recording(&audio, window_seconds)?
            .into_iter()
            .map(|s| make(s.index, s.audio))
            .collect()),
    }
}

/// Buckets items by single age-year or by the three canonical bands. Every
/// item lands in exactly one group; empty groups are omitted.
pub fn group_samples<T: Aged + Clone>(items: &[T], mode: GroupingMode) -> BTreeMap<AgeGroup, Vec<T>> {
    let mut out: BTreeMap<AgeGroup, Vec<T>> = BTreeMap::new();
    let bands = AgeGroup::canonical_bands();
    for item in items {
        let group = match mode {
            GroupingMode::PerYear => AgeGroup::year(item.age()),
            GroupingMode::PerBand => match bands.iter().find(|b| b.contains(item.age())) {
                Some(b) => b.clone(),
                None => AgeGroup::year(item.age()),
            },
        };
        out.entry(group).or_default().push(item.clone());
    }
    out
}

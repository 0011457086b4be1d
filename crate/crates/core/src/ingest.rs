//! Clip manifests, expert opinion files and patient-wise partitioning.
//!
//! Manifest CSV columns, in order:
//!
//! ```text
//! clip_id,patient_id,media_uri,frame_rate_hz,no_lung_flags[,<metadata>...]
//! ```
//!
//! `no_lung_flags` holds semicolon-separated expert ids and may be empty. Any
//! further columns are kept verbatim as metadata keyed by their header.
//!
//! The JSON-lines form carries one object per line with the same keys, except
//! that `no_lung_flags` is an array of strings; other keys become metadata.
//!
//! Expert opinion files are CSV with header `clip_id,expert_id,label`, where
//! label is one of `no`, `discrete`, `confluent`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::consensus::{ExpertPanel, ReferenceStandard};
use crate::model::{ClassLabel, Clip, ClipRole};
use crate::rng;

pub const MANIFEST_COLUMNS: [&str; 5] = [
    "clip_id",
    "patient_id",
    "media_uri",
    "frame_rate_hz",
    "no_lung_flags",
];

pub const FRAME_RATE_RANGE_HZ: (f64, f64) = (15.0, 46.0);

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("duplicate clip id {0}")]
    DuplicateClip(String),
    #[error("missing field `{name}` (line {line})")]
    MissingField { line: u64, name: String },
    #[error("duplicate opinion from expert {expert_id} on clip {clip_id}")]
    DuplicateExpertOpinion { clip_id: String, expert_id: String },
    #[error("partitioning needs at least two patients, manifest has {0}")]
    TooFewPatients(usize),
    #[error("set {set} has {available} clips, {needed} requested")]
    InsufficientClips {
        set: PartitionSet,
        available: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionSet {
    A,
    B,
}

impl std::fmt::Display for PartitionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionSet::A => f.write_str("A"),
            PartitionSet::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub clip_id: String,
    pub patient_id: String,
    pub media_uri: String,
    pub frame_rate_hz: f64,
    pub no_lung_flagged_by: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub rows: Vec<ManifestRow>,
}

impl ClipManifest {
    /// Validates clip id uniqueness and required fields.
    pub fn from_rows(rows: Vec<ManifestRow>) -> Result<Self, IngestError> {
        let mut seen = BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.patient_id.is_empty() {
                return Err(IngestError::MissingField {
                    line: i as u64 + 1,
                    name: "patient_id".into(),
                });
            }
            if !seen.insert(row.clip_id.as_str()) {
                return Err(IngestError::DuplicateClip(row.clip_id.clone()));
            }
        }
        Ok(ClipManifest { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn patients(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.patient_id.as_str()).collect()
    }

    pub fn row(&self, clip_id: &str) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.clip_id == clip_id)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let meta_keys: BTreeSet<&str> = self
            .rows
            .iter()
            .flat_map(|r| r.metadata.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = MANIFEST_COLUMNS.iter().copied().chain(meta_keys.iter().copied()).collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.clip_id.clone(),
                r.patient_id.clone(),
                r.media_uri.clone(),
                r.frame_rate_hz.to_string(),
                r.no_lung_flagged_by.join(";"),
            ];
            rec.extend(meta_keys.iter().map(|k| r.metadata.get(*k).cloned().unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestFormat {
    Csv,
    JsonLines,
}

impl ManifestFormat {
    pub fn from_path(path: &Path) -> ManifestFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson" | "json") => ManifestFormat::JsonLines,
            _ => ManifestFormat::Csv,
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<ClipManifest, IngestError> {
    let file = File::open(path)?;
    read_manifest(BufReader::new(file), ManifestFormat::from_path(path))
}

pub fn read_manifest<R: BufRead>(source: R, format: ManifestFormat) -> Result<ClipManifest, IngestError> {
    let rows = match format {
        ManifestFormat::Csv => read_manifest_csv(source)?,
        ManifestFormat::JsonLines => read_manifest_jsonl(source)?,
    };
    ClipManifest::from_rows(rows)
}

fn parse_frame_rate(raw: &str, line: u64) -> Result<f64, IngestError> {
    let hz: f64 = raw.trim().parse().map_err(|_| IngestError::ParseError {
        line,
        message: format!("frame_rate_hz `{raw}` is not a number"),
    })?;
    let (lo, hi) = FRAME_RATE_RANGE_HZ;
    if !(lo..=hi).contains(&hz) {
        return Err(IngestError::ParseError {
            line,
            message: format!("frame_rate_hz {hz} outside [{lo}, {hi}]"),
        });
    }
    Ok(hz)
}

fn required(value: &str, name: &str, line: u64) -> Result<String, IngestError> {
    let v = value.trim();
    if v.is_empty() {
        Err(IngestError::MissingField {
            line,
            name: name.to_string(),
        })
    } else {
        Ok(v.to_string())
    }
}

fn read_manifest_csv<R: Read>(source: R) -> Result<Vec<ManifestRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::ParseError { line: 1, message: e.to_string() })?
        .clone();
    for (i, expected) in MANIFEST_COLUMNS.iter().enumerate() {
        if headers.get(i).map(str::trim) != Some(*expected) {
            return Err(IngestError::MissingField {
                line: 1,
                name: (*expected).to_string(),
            });
        }
    }
    let meta_names: Vec<String> = headers
        .iter()
        .skip(MANIFEST_COLUMNS.len())
        .map(|h| h.trim().to_string())
        .collect();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::ParseError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let flags = record[4]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let metadata = meta_names
            .iter()
            .zip(record.iter().skip(MANIFEST_COLUMNS.len()))
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        rows.push(ManifestRow {
            clip_id: required(&record[0], "clip_id", line)?,
            patient_id: required(&record[1], "patient_id", line)?,
            media_uri: record[2].trim().to_string(),
            frame_rate_hz: parse_frame_rate(&record[3], line)?,
            no_lung_flagged_by: flags,
            metadata,
        });
    }
    Ok(rows)
}

fn read_manifest_jsonl<R: BufRead>(source: R) -> Result<Vec<ManifestRow>, IngestError> {
    use serde_json::Value;
    let mut rows = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::ParseError { line: line_no, message };
        let mut obj = match serde_json::from_str::<Value>(&line).map_err(|e| parse_err(e.to_string()))? {
            Value::Object(map) => map,
            _ => return Err(parse_err("expected a JSON object".into())),
        };
        let mut text = |name: &str| -> Result<String, IngestError> {
            match obj.remove(name) {
                Some(Value::String(s)) => required(&s, name, line_no),
                Some(Value::Number(n)) => Ok(n.to_string()),
                Some(_) => Err(parse_err(format!("field `{name}` must be a string"))),
                None => Err(IngestError::MissingField { line: line_no, name: name.into() }),
            }
        };
        let clip_id = text("clip_id")?;
        let patient_id = text("patient_id")?;
        let media_uri = text("media_uri")?;
        let frame_rate_hz = parse_frame_rate(&text("frame_rate_hz")?, line_no)?;
        let flags = match obj.remove("no_lung_flags") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s),
                    _ => Err(parse_err("no_lung_flags must hold strings".into())),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(parse_err("no_lung_flags must be an array".into())),
        };
        let metadata = obj
            .into_iter()
            .map(|(k, v)| {
                let v = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, v)
            })
            .collect();
        rows.push(ManifestRow {
            clip_id,
            patient_id,
            media_uri,
            frame_rate_hz,
            no_lung_flagged_by: flags,
            metadata,
        });
    }
    Ok(rows)
}

pub fn load_expert_opinions(path: &Path) -> Result<ExpertPanel, IngestError> {
    read_expert_opinions(BufReader::new(File::open(path)?))
}

/// Experts are ordered by first appearance in the file.
pub fn read_expert_opinions<R: Read>(source: R) -> Result<ExpertPanel, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::ParseError { line: 1, message: e.to_string() })?
        .clone();
    for (i, expected) in ["clip_id", "expert_id", "label"].iter().enumerate() {
        if headers.get(i).map(str::trim) != Some(*expected) {
            return Err(IngestError::MissingField { line: 1, name: (*expected).into() });
        }
    }
    let mut panel = ExpertPanel::default();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::ParseError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let clip_id = required(&record[0], "clip_id", line)?;
        let expert_id = required(&record[1], "expert_id", line)?;
        let label: ClassLabel = record[2]
            .parse()
            .map_err(|e: crate::model::UnknownLabel| IngestError::ParseError { line, message: e.to_string() })?;
        if !panel.experts.contains(&expert_id) {
            panel.experts.push(expert_id.clone());
        }
        let by_expert = panel.opinions.entry(clip_id.clone()).or_default();
        if by_expert.insert(expert_id.clone(), label).is_some() {
            return Err(IngestError::DuplicateExpertOpinion { clip_id, expert_id });
        }
    }
    Ok(panel)
}

pub fn write_expert_opinions<W: std::io::Write>(panel: &ExpertPanel, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["clip_id", "expert_id", "label"])?;
    for (clip, by_expert) in &panel.opinions {
        for expert in &panel.experts {
            if let Some(label) = by_expert.get(expert) {
                w.write_record([clip.as_str(), expert.as_str(), label.as_str()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub seed: u64,
    pub set_a_patients: BTreeSet<String>,
    pub set_b_patients: BTreeSet<String>,
    pub training_clips: BTreeSet<String>,
    pub test_clips: BTreeSet<String>,
    pub excluded_clips: BTreeSet<String>,
}

impl PartitionPlan {
    /// Clip ids of the manifest whose patient is in `set`, sorted.
    pub fn clips_of(&self, manifest: &ClipManifest, set: PartitionSet) -> Vec<String> {
        let patients = match set {
            PartitionSet::A => &self.set_a_patients,
            PartitionSet::B => &self.set_b_patients,
        };
        let mut ids: Vec<String> = manifest
            .rows
            .iter()
            .filter(|r| patients.contains(&r.patient_id))
            .map(|r| r.clip_id.clone())
            .collect();
        ids.sort();
        ids
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Shuffles patients and splits them ⌈n/2⌉ / ⌊n/2⌋; clips follow their patient.
pub fn partition_by_patient(manifest: &ClipManifest, seed: u64) -> Result<PartitionPlan, IngestError> {
    let mut patients: Vec<String> = manifest.patients().into_iter().map(String::from).collect();
    if patients.len() < 2 {
        return Err(IngestError::TooFewPatients(patients.len()));
    }
    patients.shuffle(&mut rng::stream(seed, &["partition"]));
    let split = patients.len().div_ceil(2);
    let set_b_patients = patients.split_off(split).into_iter().collect();
    Ok(PartitionPlan {
        seed,
        set_a_patients: patients.into_iter().collect(),
        set_b_patients,
        training_clips: BTreeSet::new(),
        test_clips: BTreeSet::new(),
        excluded_clips: BTreeSet::new(),
    })
}

/// Draws `n_per_set` clips from each set, then drops every clip an expert
/// flagged as not containing lung. Selection does not look at the flags, so
/// flagging a clip never changes which other clips are drawn.
pub fn select_and_exclude(
    plan: &PartitionPlan,
    manifest: &ClipManifest,
    n_per_set: usize,
    seed: u64,
) -> Result<PartitionPlan, IngestError> {
    let mut draw = rng::stream(seed, &["select"]);
    let mut pick = |set: PartitionSet| -> Result<BTreeSet<String>, IngestError> {
        let pool = plan.clips_of(manifest, set);
        if pool.len() < n_per_set {
            return Err(IngestError::InsufficientClips {
                set,
                available: pool.len(),
                needed: n_per_set,
            });
        }
        Ok(rand::seq::index::sample(&mut draw, pool.len(), n_per_set)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect())
    };
    let selected_a = pick(PartitionSet::A)?;
    let selected_b = pick(PartitionSet::B)?;

    let excluded: BTreeSet<String> = manifest
        .rows
        .iter()
        .filter(|r| !r.no_lung_flagged_by.is_empty())
        .map(|r| r.clip_id.clone())
        .collect();
    Ok(PartitionPlan {
        training_clips: selected_a.difference(&excluded).cloned().collect(),
        test_clips: selected_b.difference(&excluded).cloned().collect(),
        excluded_clips: excluded,
        ..plan.clone()
    })
}

/// Clip records for every manifest row. Training and test clips take their
/// label from `reference` when one is given.
pub fn assemble_clips(
    manifest: &ClipManifest,
    plan: &PartitionPlan,
    reference: Option<&ReferenceStandard>,
) -> Vec<Clip> {
    manifest
        .rows
        .iter()
        .map(|r| {
            let role = if plan.training_clips.contains(&r.clip_id) {
                ClipRole::Training
            } else if plan.test_clips.contains(&r.clip_id) {
                ClipRole::Test
            } else {
                ClipRole::Unlabeled
            };
            let reference_label = match role {
                ClipRole::Unlabeled => None,
                _ => reference.and_then(|s| s.get(&r.clip_id)),
            };
            Clip {
                clip_id: r.clip_id.clone(),
                patient_id: r.patient_id.clone(),
                role,
                reference_label,
                excluded: plan.excluded_clips.contains(&r.clip_id),
                frame_rate_hz: r.frame_rate_hz,
                media_uri: r.media_uri.clone(),
            }
        })
        .collect()
}

/// Number of clips per patient in the manifest.
pub fn clips_per_patient(manifest: &ClipManifest) -> HashMap<&str, usize> {
    let mut out = HashMap::new();
    for r in &manifest.rows {
        *out.entry(r.patient_id.as_str()).or_default() += 1;
    }
    out
}

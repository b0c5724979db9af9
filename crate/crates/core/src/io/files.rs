//! Dataset, model bundle, and feature files.
//!
//! Datasets are line-delimited JSON: a header object on the first line, then
//! one record per line. Bundles are a single JSON document. Numbers are
//! written in shortest round-trip decimal form, so every `f64` reads back
//! bit-identical.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::from_json_text;
use crate::error::{Error, Result};
use crate::inference::{Dataset, DatasetHeader, DatasetRecord, ModelBundle};

fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let at = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        (!line.trim().is_empty()).then_some((at, line))
    })
}

fn parse_line<T: serde::de::DeserializeOwned>(line: &str, at: usize, path: &Path, what: &str) -> Result<T> {
    from_json_text(line, path).map_err(|e| match e {
        Error::Parse { offset, reason, .. } => Error::Parse {
            path: path.to_path_buf(),
            offset: at as u64 + offset,
            reason: format!("{what}: {reason}"),
        },
        Error::Config { key, reason } => Error::Parse {
            path: path.to_path_buf(),
            offset: at as u64,
            reason: format!("{what}: `{key}`: {reason}"),
        },
        other => other,
    })
}

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(&dataset.header)?;
    out.push(b'\n');
    for r in &dataset.records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    dataset.validate()?;
    super::write_atomic(path.as_ref(), &encode_dataset(dataset)?)
}

/// Parses a dataset file and checks the header against every record.
pub fn decode_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = jsonl_lines(text);
    let (at, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        offset: 0,
        reason: "empty dataset file".into(),
    })?;
    let header: DatasetHeader = parse_line(first, at, path, "header")?;
    let records = lines
        .enumerate()
        .map(|(i, (at, line))| parse_line::<DatasetRecord>(line, at, path, &format!("record {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset { header, records };
    dataset.validate()?;
    Ok(dataset)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&text, path)
}

pub fn write_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.validate()?;
    let mut text = serde_json::to_string_pretty(bundle)?;
    text.push('\n');
    super::write_atomic(path.as_ref(), text.as_bytes())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bundle: ModelBundle = from_json_text(&text, path).map_err(|e| match e {
        Error::Config { key, reason } => Error::Model(format!("{}: `{key}`: {reason}", path.display())),
        other => other,
    })?;
    bundle.validate()?;
    Ok(bundle)
}

/// Features of one window of an unlabelled recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRow {
    pub source: String,
    pub window: usize,
    pub start_time: f64,
    pub features: Vec<f64>,
}

/// Writes a header line and one row per window, in the dataset line format.
pub fn write_feature_rows(header: &DatasetHeader, rows: &[FeatureRow], mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<features>", e);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n").map_err(io)?;
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

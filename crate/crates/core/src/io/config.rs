//! The run configuration file: one strict JSON tree covering simulation,
//! analysis windows, the sweep, training, and output paths.
//!
//! Every section has defaults, so a file only needs the values it changes.
//! Unknown keys are rejected with their full dotted path. Overrides use the
//! same paths (`simulation.contact.force=1.0`); a path that does not exist in
//! the fully defaulted tree is an error rather than a silent addition.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::wav::WavEncoding;
use crate::error::{Error, Result};
use crate::inference::{DatasetSpec, SweepGrid, TrainingConfig};
use crate::simulator::SimulationConfig;

/// Time windows and tolerances for the spectral checks of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Early window shown for comparison, s.
    pub transient: [f64; 2],
    /// Window whose spectrum is reported and checked, s.
    pub steady: [f64; 2],
    /// Spectrogram frame length and hop, s.
    pub frame: f64,
    pub hop: f64,
    /// Allowed relative error of each dominant peak.
    pub tolerance: f64,
    /// Reference peaks (Hz) checked in addition to the closed-form predictions.
    pub expected_peaks: Option<Vec<f64>>,
    pub wav_encoding: WavEncoding,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            transient: [0.01, 0.05],
            steady: [0.30, 0.35],
            frame: 0.02,
            hop: 0.005,
            tolerance: 0.02,
            expected_peaks: None,
            wav_encoding: WavEncoding::Float32,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, [a, b]) in [("analysis.transient", self.transient), ("analysis.steady", self.steady)] {
            if !(a >= 0.0 && b > a) {
                return Err(Error::config(key, format!("need 0 <= start < end, got [{a}, {b}]")));
            }
        }
        if !(self.frame > 0.0 && self.hop > 0.0) {
            return Err(Error::config("analysis.frame", "frame and hop must be > 0"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("analysis.tolerance", "must be > 0"));
        }
        if let Some(p) = self.expected_peaks.as_ref().and_then(|v| v.iter().find(|f| !(**f > 0.0))) {
            return Err(Error::config("analysis.expected_peaks", format!("must be > 0, got {p}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    pub dataset: DatasetSpec,
}

/// Where commands read and write artifacts. Command-line flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    /// Dataset read by `train` and `eval`; defaults to `<out_dir>/dataset.jsonl`.
    pub dataset: Option<PathBuf>,
    /// Bundle read by `infer` and `eval`; defaults to `<out_dir>/model.json`.
    pub model: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            dataset: None,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub simulation: SimulationConfig<f64>,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
    pub training: TrainingConfig,
    pub paths: PathsConfig,
}

/// Re-roots a validation key under `prefix` unless it already starts there.
fn under(prefix: &str, strip: &str, e: Error) -> Error {
    match e {
        Error::Config { key, reason } if !key.starts_with(prefix) => {
            let rest = key.strip_prefix(strip).unwrap_or(&key);
            let rest = rest.trim_start_matches('.');
            let key = if rest.is_empty() {
                prefix.trim_end_matches('.').to_string()
            } else {
                format!("{prefix}{rest}")
            };
            Error::Config { key, reason }
        }
        other => other,
    }
}

impl RunConfig {
    /// Checks every section; keys in errors are full paths into this tree.
    pub fn validate(&self) -> Result<()> {
        self.simulation
            .validate()
            .map_err(|e| under("simulation.", "", e))?;
        self.analysis.validate()?;
        self.sweep.grid.validate()?;
        self.sweep.dataset.validate().map_err(|e| match e {
            Error::Config { ref key, .. } if key.starts_with("features") => under("sweep.dataset.", "", e),
            other => under("sweep.dataset.", "sweep", other),
        })?;
        self.training.validate()
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("dataset.jsonl"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("model.json"))
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len()) as u64
}

/// Deserializes a `T` from JSON text, naming the dotted key on data errors and
/// the byte offset on syntax errors.
pub(crate) fn from_json_text<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let syntax = |inner: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(text, inner.line(), inner.column()),
        reason: inner.to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            Error::config(if key == "." { String::from("<root>") } else { key }, inner.to_string())
        } else {
            syntax(inner)
        }
    })?;
    de.end().map_err(syntax)?;
    Ok(value)
}

/// `path` as given, or with `.json` appended when it has no extension and
/// does not exist.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.extension().is_none() && !path.exists() {
        let with = path.with_extension("json");
        if with.exists() {
            return with;
        }
    }
    path.to_path_buf()
}

/// Reads, overrides, and validates a run configuration.
pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let path = resolve_config_path(path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let parsed: RunConfig = from_json_text(&text, &path)?;
    let config = apply_overrides(&parsed, overrides)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    load_config_with(path.as_ref(), &[])
}

/// Writes the complete tree, defaults included.
pub fn save_config(config: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    super::write_atomic(path.as_ref(), text.as_bytes())
}

/// Short names accepted in override paths.
const ALIASES: [(&str, &str); 4] = [("F", "force"), ("x", "location"), ("dt", "timestep"), ("N", "nodes")];

fn split_path(key: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for part in key.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if name.is_empty() && rest.is_empty() {
            return Err(Error::config(key, "empty path segment"));
        }
        if !name.is_empty() {
            out.push(name.to_string());
        }
        while let Some(stripped) = rest.strip_prefix('[') {
            let close = stripped
                .find(']')
                .ok_or_else(|| Error::config(key, "unclosed `[` in override path"))?;
            out.push(stripped[..close].to_string());
            rest = &stripped[close + 1..];
        }
        if !rest.is_empty() {
            return Err(Error::config(key, "unexpected text after `]`"));
        }
    }
    Ok(out)
}

fn child<'a>(node: &'a mut Value, segment: &str) -> Option<&'a mut Value> {
    match node {
        Value::Object(map) => {
            if map.contains_key(segment) {
                return map.get_mut(segment);
            }
            let alias = ALIASES.iter().find(|(short, _)| *short == segment)?.1;
            map.get_mut(alias)
        }
        Value::Array(items) => segment.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
        _ => None,
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let segments = split_path(key)?;
    let rooted = tree.as_object().is_some_and(|m| m.contains_key(&segments[0]));
    let mut node = if rooted {
        &mut *tree
    } else {
        tree.get_mut("simulation")
            .ok_or_else(|| Error::config(key, "unknown configuration key"))?
    };
    for seg in &segments {
        node = child(node, seg).ok_or_else(|| Error::config(key, "unknown configuration key"))?;
    }
    *node = value;
    Ok(())
}

/// Applies `key=value` overrides. Values are parsed as JSON, falling back to
/// a plain string.
pub fn apply_overrides(config: &RunConfig, overrides: &[String]) -> Result<RunConfig> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut tree = serde_json::to_value(config)?;
    for raw in overrides {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| Error::config(raw.as_str(), "override must look like key=value"))?;
        let key = key.trim();
        let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().to_string()));
        set_path(&mut tree, key, value)?;
    }
    let text = serde_json::to_string(&tree)?;
    from_json_text(&text, Path::new("<overrides>"))
}

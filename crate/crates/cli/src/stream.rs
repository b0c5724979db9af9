//! `features` and `infer`: windowed processing of recordings.

use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use string_tactile::audio::StereoAudio;
use string_tactile::inference::DatasetHeader;
use string_tactile::io::{self, FeatureRow, RunConfig};
use string_tactile::spectral::{sliding_windows, FeatureConfig, FeatureExtractor};

use crate::Outcome;

/// Feature vectors and start times of every window after `start` seconds.
fn windowed_features(audio: &StereoAudio<f64>, features: FeatureConfig, config: &RunConfig, start: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let spec = &config.sweep.dataset;
    let skip = ((start.max(0.0) * audio.sample_rate).round() as usize).min(audio.frames());
    let tail = audio.slice(skip, audio.frames() - skip);
    let mut extractor = FeatureExtractor::new(features)?;
    sliding_windows(&tail, spec.window, spec.hop)?
        .into_iter()
        .map(|w| Ok((start + w.start_time, extractor.extract(&w.audio)?.values)))
        .collect()
}

pub fn features(config: &RunConfig, inputs: &[impl AsRef<Path>], output: Option<&Path>, start: f64) -> Result<Outcome> {
    let features = config.sweep.dataset.features;
    let mut rows = Vec::new();
    for input in inputs {
        let input = input.as_ref();
        let audio = io::read_wav(input)?;
        let windows = windowed_features(&audio, features, config, start)?;
        if windows.is_empty() {
            log::warn!("{} is shorter than one window", input.display());
        }
        rows.extend(windows.into_iter().enumerate().map(|(window, (start_time, values))| FeatureRow {
            source: input.display().to_string(),
            window,
            start_time,
            features: values,
        }));
    }
    let header = DatasetHeader::for_features(&features);
    match output {
        Some(p) if p == Path::new("-") => io::write_feature_rows(&header, &rows, std::io::stdout().lock())?,
        _ => {
            let path = output.map_or_else(|| config.paths.out_dir.join("features.jsonl"), Path::to_path_buf);
            let mut buf = Vec::new();
            io::write_feature_rows(&header, &rows, &mut buf)?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
        }
    }
    Ok(Outcome::Pass)
}

/// One line of the `infer` stream.
#[derive(Debug, Serialize)]
struct EstimateLine {
    time_s: f64,
    p_contact: f64,
    p_slip: f64,
    x_mm: f64,
    force_n: f64,
    contact: bool,
}

pub fn infer(config: &RunConfig, input: &Path, model: Option<&Path>, start: f64) -> Result<Outcome> {
    let bundle = io::read_bundle(model.map_or_else(|| config.model_path(), Path::to_path_buf))?;
    let features = bundle
        .metadata
        .features
        .ok_or_else(|| anyhow!("the bundle was trained on external features and cannot read audio directly"))?;
    let layout = features.layout_hash();
    let audio = io::read_wav(input)?;
    let mut out = BufWriter::new(std::io::stdout().lock());
    for (time, values) in windowed_features(&audio, features, config, start)? {
        let e = bundle.forward_checked(&values, &layout)?;
        let line = EstimateLine {
            time_s: time,
            p_contact: e.p_contact,
            p_slip: e.p_slip,
            x_mm: e.location * 1e3,
            force_n: e.force,
            contact: e.contact,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(Outcome::Pass)
}

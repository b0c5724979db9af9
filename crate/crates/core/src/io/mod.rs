//! Files in and out: WAV audio, run configurations, datasets, model
//! bundles, and CSV exports.

pub mod config;
mod export;
mod files;
mod wav;

use std::path::Path;

pub use config::{
    apply_overrides, load_config, load_config_with, resolve_config_path, save_config, AnalysisConfig, PathsConfig,
    RunConfig, SweepConfig,
};
pub use export::{
    write_metrics_csv, write_spectrogram_csv, write_spectrum_csv, write_trace_csv, write_training_report_csv,
};
pub use files::{
    decode_dataset, encode_dataset, read_bundle, read_dataset, write_bundle, write_dataset, write_feature_rows,
    FeatureRow,
};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavEncoding, WavSpec};

use crate::error::{Error, Result};

/// Writes through a sibling temporary file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

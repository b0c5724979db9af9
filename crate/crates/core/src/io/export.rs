//! CSV exports. Every file starts with a header row.

use std::path::Path;

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::inference::{MetricsReport, TrainingReport};
use crate::scalar::Real;
use crate::spectral::{Spectrogram, Spectrum};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    super::write_atomic(path, &bytes)
}

/// `frequency_hz,magnitude` for every bin.
pub fn write_spectrum_csv<T: Real>(spectrum: &Spectrum<T>, path: impl AsRef<Path>) -> Result<()> {
    let rows = spectrum
        .frequencies()
        .zip(&spectrum.magnitudes)
        .map(|(f, m)| [f.to_string(), m.to_string()]);
    write_rows(path.as_ref(), &["frequency_hz", "magnitude"], rows)
}

/// Long format `time_s,frequency_hz,magnitude` for one channel.
pub fn write_spectrogram_csv<T: Real>(spec: &Spectrogram<T>, channel: usize, path: impl AsRef<Path>) -> Result<()> {
    let freqs = spec.frequencies();
    let rows = spec.frame_times.iter().zip(&spec.columns[channel]).flat_map(|(t, col)| {
        freqs
            .iter()
            .zip(col)
            .map(move |(f, m)| [t.to_string(), f.to_string(), m.to_string()])
    });
    write_rows(path.as_ref(), &["time_s", "frequency_hz", "magnitude"], rows)
}

/// `time_s,ch1,ch2` from `start` (seconds into the audio) for `len` frames.
pub fn write_trace_csv<T: Real>(audio: &StereoAudio<T>, start: usize, len: usize, path: impl AsRef<Path>) -> Result<()> {
    let end = (start + len).min(audio.frames());
    let rows = (start..end).map(|i| {
        [
            (i as f64 / audio.sample_rate).to_string(),
            audio.left[i].to_string(),
            audio.right[i].to_string(),
        ]
    });
    write_rows(path.as_ref(), &["time_s", "ch1", "ch2"], rows)
}

/// One row per labelled report, e.g. clean and each noise policy.
pub fn write_metrics_csv(reports: &[(String, MetricsReport)], path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<&str> = std::iter::once("subset")
        .chain(MetricsReport::CSV_HEADER.split(','))
        .collect();
    let rows = reports.iter().map(|(name, r)| {
        std::iter::once(name.clone()).chain(r.csv_row().split(',').map(str::to_string).collect::<Vec<_>>())
    });
    write_rows(path.as_ref(), &header, rows)
}

pub fn write_training_report_csv(report: &TrainingReport, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<&str> = TrainingReport::CSV_HEADER.split(',').collect();
    let rows = report
        .csv_rows()
        .map(|line| line.split(',').map(str::to_string).collect::<Vec<_>>());
    write_rows(path.as_ref(), &header, rows)
}

use rustfft::FftPlanner;

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{fft_magnitude_with, window_frames, WindowFunction};

/// Hann-framed magnitude spectra of both channels. `columns[ch][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    /// Start time of each frame, s.
    pub frame_times: Vec<f64>,
    pub bin_width: f64,
    pub columns: [Vec<Vec<T>>; 2],
}

impl<T: Real> Spectrogram<T> {
    pub fn frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn bins(&self) -> usize {
        self.columns[0].first().map_or(0, |c| c.len())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| k as f64 * self.bin_width).collect()
    }

    /// Index of the strongest bin in each frame of `channel`, ignoring DC.
    pub fn dominant_bins(&self, channel: usize) -> Vec<usize> {
        self.columns[channel]
            .iter()
            .map(|col| {
                (1..col.len())
                    .max_by(|a, b| col[*a].partial_cmp(&col[*b]).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap_or(0)
            })
            .collect()
    }
}

pub fn spectrogram<T: Real>(audio: &StereoAudio<T>, frame: f64, hop: f64) -> Result<Spectrogram<T>> {
    let width = window_frames(frame, audio.sample_rate);
    let step = window_frames(hop, audio.sample_rate);
    if width == 0 || width > audio.frames() {
        return Err(Error::config(
            "spectrogram.frame",
            format!("{frame} s must be positive and fit in {} s of audio", audio.duration()),
        ));
    }
    if step == 0 {
        return Err(Error::config("spectrogram.hop", format!("must cover at least one sample, got {hop}")));
    }
    let count = (audio.frames() - width) / step + 1;
    let mut planner = FftPlanner::new();
    let mut columns: [Vec<Vec<T>>; 2] = [Vec::with_capacity(count), Vec::with_capacity(count)];
    let mut bin_width = 0.0;
    for k in 0..count {
        for (ch, out) in columns.iter_mut().enumerate() {
            let x = &audio.channel(ch)[k * step..k * step + width];
            let s = fft_magnitude_with(&mut planner, x, audio.sample_rate, WindowFunction::Hann);
            bin_width = s.bin_width.as_f64();
            out.push(s.magnitudes);
        }
    }
    Ok(Spectrogram {
        frame_times: (0..count).map(|k| (k * step) as f64 / audio.sample_rate).collect(),
        bin_width,
        columns,
    })
}

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_WINDOW_SECONDS: f64 = 0.1;

/// Fixed-length two-channel block cut from a longer recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioWindow<T> {
    pub audio: StereoAudio<T>,
    /// Offset of the first sample within the source, s.
    pub start_time: f64,
    /// Position within the source's window sequence.
    pub index: usize,
}

impl<T: Real> AudioWindow<T> {
    pub fn new(audio: StereoAudio<T>, start_time: f64, index: usize) -> Self {
        Self {
            audio,
            start_time,
            index,
        }
    }

    pub fn frames(&self) -> usize {
        self.audio.frames()
    }

    pub fn sample_rate(&self) -> f64 {
        self.audio.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.audio.duration()
    }
}

/// `round(duration * sample_rate)`.
pub fn window_frames(duration: f64, sample_rate: f64) -> usize {
    (duration * sample_rate).round() as usize
}

/// Cuts `audio` into windows of `duration` seconds every `hop` seconds.
/// Both are rounded to whole samples; a recording shorter than one window
/// yields no windows.
pub fn sliding_windows<T: Real>(
    audio: &StereoAudio<T>,
    duration: f64,
    hop: f64,
) -> Result<Vec<AudioWindow<T>>> {
    let width = window_frames(duration, audio.sample_rate);
    let step = window_frames(hop, audio.sample_rate);
    if !(duration > 0.0) || width == 0 {
        return Err(Error::config("window.duration", format!("must cover at least one sample, got {duration}")));
    }
    if !(hop > 0.0) || step == 0 {
        return Err(Error::config("window.hop", format!("must cover at least one sample, got {hop}")));
    }
    let total = audio.frames();
    if total < width {
        return Ok(Vec::new());
    }
    let count = (total - width) / step + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * step;
            AudioWindow::new(audio.slice(start, width), start as f64 / audio.sample_rate, k)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audio(secs: f64) -> StereoAudio<f64> {
        let n = window_frames(secs, 44_100.0);
        StereoAudio::new(44_100.0, (0..n).map(|i| i as f64).collect(), vec![0.0; n]).unwrap()
    }

    #[test]
    fn window_counts() {
        assert_eq!(sliding_windows(&audio(1.0), 0.1, 0.1).unwrap().len(), 10);
        assert!(sliding_windows(&audio(0.05), 0.1, 0.1).unwrap().is_empty());
        assert_eq!(sliding_windows(&audio(0.4), 0.1, 0.05).unwrap().len(), 7);
    }

    #[test]
    fn windows_have_default_width_and_start_times() {
        let w = sliding_windows(&audio(0.4), DEFAULT_WINDOW_SECONDS, 0.05).unwrap();
        for (k, win) in w.iter().enumerate() {
            assert_eq!(win.frames(), 4410);
            assert_eq!(win.index, k);
            assert!((win.start_time - 0.05 * k as f64).abs() < 1e-12);
            assert_eq!(win.audio.left[0], (2205 * k) as f64);
        }
    }

    #[test]
    fn bad_hop_is_rejected() {
        assert!(sliding_windows(&audio(0.4), 0.1, 0.0).is_err());
        assert!(sliding_windows(&audio(0.4), 0.0, 0.1).is_err());
    }
}

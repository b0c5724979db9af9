//! Localized sinusoidal driver with spectral-peak frequency feedback.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{fft_magnitude_with, WindowFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig<T: Real> {
    /// Peak nodal force, N.
    pub amplitude: T,
    /// Drive centre as a fraction of the segment length.
    pub center: T,
    /// Gaussian standard deviation as a fraction of the segment length.
    pub width: T,
    /// Starting drive frequency, Hz. `None` starts at the open-string fundamental.
    pub initial_frequency: Option<T>,
    /// Length of the pickup history analysed for each update, s.
    pub feedback_window: T,
    /// Time between frequency updates, s.
    pub feedback_period: T,
    /// Search range for the dominant frequency, Hz.
    pub feedback_band: (T, T),
}

impl<T: Real> Default for DriveConfig<T> {
    fn default() -> Self {
        Self {
            amplitude: T::of(1e-4),
            center: T::of(0.5),
            width: T::of(0.02),
            initial_frequency: None,
            feedback_window: T::of(0.05),
            feedback_period: T::of(0.01),
            feedback_band: (T::of(100.0), T::of(5000.0)),
        }
    }
}

impl<T: Real> DriveConfig<T> {
    pub fn validate(&self, key: &str) -> Result<()> {
        let err = |field: &str, reason: String| Error::config(format!("{key}.{field}"), reason);
        if !(self.amplitude >= T::zero()) {
            return Err(err("amplitude", format!("must be >= 0, got {}", self.amplitude)));
        }
        if !(self.center > T::zero() && self.center < T::one()) {
            return Err(err("center", format!("must lie in (0, 1), got {}", self.center)));
        }
        if !(self.width > T::zero()) {
            return Err(err("width", format!("must be > 0, got {}", self.width)));
        }
        if let Some(f) = self.initial_frequency {
            if !(f > T::zero()) {
                return Err(err("initial_frequency", format!("must be > 0, got {f}")));
            }
        }
        if !(self.feedback_window > T::zero()) {
            return Err(err("feedback_window", "must be > 0".into()));
        }
        if !(self.feedback_period > T::zero()) {
            return Err(err("feedback_period", "must be > 0".into()));
        }
        let (lo, hi) = self.feedback_band;
        if !(lo > T::zero() && lo < hi) {
            return Err(err("feedback_band", format!("need 0 < lower < upper, got ({lo}, {hi})")));
        }
        if self.feedback_window * lo < T::of(2.0) {
            return Err(err(
                "feedback_window",
                format!("must span >= 2 cycles of the band lower edge {lo} Hz"),
            ));
        }
        Ok(())
    }
}

/// Unit-peak Gaussian `exp(-(x - c)^2 / (2 s^2))`.
#[inline]
pub fn drive_profile<T: Real>(x: T, center: T, width: T) -> T {
    let d = (x - center) / width;
    (-(d * d) * T::of(0.5)).exp()
}

/// Nodal drive force `A sin(2 pi f t + phase) g(x_i)`.
///
/// `position` is the node's local coordinate, `segment_length` converts the
/// fractional centre and width of `drive` into metres.
pub fn drive_force_at_node<T: Real>(
    position: T,
    segment_length: T,
    time: T,
    drive: &DriveConfig<T>,
    frequency: T,
    phase: T,
) -> T {
    let g = drive_profile(
        position,
        drive.center * segment_length,
        drive.width * segment_length,
    );
    drive.amplitude * (T::TAU() * frequency * time + phase).sin() * g
}

/// Phase `phi` of the component `cos(2 pi f tau + phi)` of `recent`, with
/// `tau = 0` at the last sample. Fitted over the trailing whole periods.
pub fn trailing_phase<T: Real>(recent: &[T], frequency: T, sample_rate: f64) -> T {
    let f = frequency.as_f64();
    let periods = (recent.len() as f64 * f / sample_rate).floor().min(4.0);
    let n = ((periods * sample_rate / f).round() as usize).clamp(1, recent.len());
    let tail = &recent[recent.len() - n..];
    let omega = std::f64::consts::TAU * f / sample_rate;
    let (mut c, mut s) = (0.0, 0.0);
    for (j, v) in tail.iter().enumerate() {
        let tau = (j as f64) - (n as f64 - 1.0);
        c += v.as_f64() * (omega * tau).cos();
        s += v.as_f64() * (omega * tau).sin();
    }
    T::of((-s).atan2(c))
}

/// Estimates the dominant frequency of `recent` within `band`.
///
/// The window is mean-removed and Hann-weighted; the strongest in-band bin is
/// refined by a three-point parabola. Returns `previous` when the window holds
/// no in-band energy.
pub fn update_drive_frequency<T: Real>(
    recent: &[T],
    band: (T, T),
    sample_rate: f64,
    previous: T,
) -> Result<T> {
    let mut planner = FftPlanner::new();
    FrequencyTracker::new(band, sample_rate).estimate(&mut planner, recent, previous)
}

/// Reusable feedback estimator for a fixed band and sample rate.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyTracker<T> {
    band: (T, T),
    sample_rate: f64,
}

impl<T: Real> FrequencyTracker<T> {
    pub fn new(band: (T, T), sample_rate: f64) -> Self {
        Self { band, sample_rate }
    }

    pub fn minimum_len(&self) -> usize {
        (2.0 * self.sample_rate / self.band.0.as_f64()).ceil() as usize
    }

    pub fn estimate(&self, planner: &mut FftPlanner<T>, recent: &[T], previous: T) -> Result<T> {
        if recent.len() < self.minimum_len() {
            return Err(Error::Feedback(format!(
                "window of {} samples is shorter than two cycles of {} Hz ({} samples)",
                recent.len(),
                self.band.0,
                self.minimum_len()
            )));
        }
        let n = T::of(recent.len() as f64);
        let mean = recent.iter().copied().sum::<T>() / n;
        let scale = recent.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale == T::zero() {
            return Ok(previous);
        }
        let centred: Vec<T> = recent.iter().map(|v| *v - mean).collect();
        let spectrum = fft_magnitude_with(planner, &centred, self.sample_rate, WindowFunction::Hann);
        let Some(bin) = spectrum.argmax_in_band(self.band.0, self.band.1) else {
            return Ok(previous);
        };
        // Rounding residue of a constant signal sits many orders below any real line.
        if spectrum.magnitudes[bin] <= T::of(1e-9) * n * scale {
            return Ok(previous);
        }
        Ok(spectrum.frequency(spectrum.refine_peak(bin)))
    }
}

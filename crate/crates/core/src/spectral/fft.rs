//! Windowed magnitude spectra and peak picking.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFunction {
    Rectangular,
    Hann,
}

impl WindowFunction {
    /// Symmetric window coefficients of length `n`.
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            WindowFunction::Rectangular => vec![T::one(); n],
            WindowFunction::Hann => {
                if n == 1 {
                    return vec![T::one()];
                }
                let denom = (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let phase = 2.0 * std::f64::consts::PI * i as f64 / denom;
                        T::of(0.5 - 0.5 * phase.cos())
                    })
                    .collect()
            }
        }
    }
}

/// One-sided magnitude spectrum, bins `0..=fft_len/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub magnitudes: Vec<T>,
    pub bin_width: T,
    pub fft_len: usize,
    pub window: WindowFunction,
}

impl<T: Real> Spectrum<T> {
    pub fn frequency(&self, bin: T) -> T {
        bin * self.bin_width
    }

    pub fn frequencies(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.magnitudes.len()).map(move |i| T::of(i as f64) * self.bin_width)
    }

    /// Sum of squared magnitudes over the full two-sided spectrum.
    pub fn two_sided_energy(&self) -> T {
        let m = &self.magnitudes;
        let last = m.len() - 1;
        let mut total = T::zero();
        for (i, v) in m.iter().enumerate() {
            let w = if i == 0 || (i == last && self.fft_len.is_multiple_of(2)) {
                T::one()
            } else {
                T::of(2.0)
            };
            total = total + w * *v * *v;
        }
        total
    }

    /// Index of the largest bin whose centre frequency lies in `[lo, hi]`.
    pub fn argmax_in_band(&self, lo: T, hi: T) -> Option<usize> {
        let (first, last) = self.band_bins(lo, hi)?;
        let mut best = first;
        for i in first..=last {
            if self.magnitudes[i] > self.magnitudes[best] {
                best = i;
            }
        }
        Some(best)
    }

    /// Inclusive bin range covering `[lo, hi]`, or `None` if empty.
    pub fn band_bins(&self, lo: T, hi: T) -> Option<(usize, usize)> {
        let first = (lo / self.bin_width).ceil().max(T::zero());
        let last = (hi / self.bin_width).floor();
        let max_bin = T::of((self.magnitudes.len() - 1) as f64);
        let last = last.min(max_bin);
        if first > last {
            return None;
        }
        Some((first.as_f64() as usize, last.as_f64() as usize))
    }

    /// Fractional bin position of the peak at `bin`, from a parabola through
    /// the log magnitudes of its neighbours (linear magnitudes when any of the
    /// three is zero).
    pub fn refine_peak(&self, bin: usize) -> T {
        let m = &self.magnitudes;
        if bin == 0 || bin + 1 >= m.len() {
            return T::of(bin as f64);
        }
        let (a, b, c) = (m[bin - 1], m[bin], m[bin + 1]);
        let (a, b, c) = if a > T::zero() && b > T::zero() && c > T::zero() {
            (a.ln(), b.ln(), c.ln())
        } else {
            (a, b, c)
        };
        T::of(bin as f64) + parabolic_offset(a, b, c)
    }
}

/// Vertex offset in `[-0.5, 0.5]` of the parabola through `(-1, a), (0, b), (1, c)`.
pub fn parabolic_offset<T: Real>(a: T, b: T, c: T) -> T {
    let denom = a - T::of(2.0) * b + c;
    if denom == T::zero() || !denom.is_finite() {
        return T::zero();
    }
    let half = T::of(0.5);
    (half * (a - c) / denom).max(-half).min(half)
}

/// Magnitude spectrum of `samples` after windowing and zero padding to the
/// next power of two.
pub fn fft_magnitude<T: Real>(samples: &[T], sample_rate: f64, window: WindowFunction) -> Spectrum<T> {
    let mut planner = FftPlanner::new();
    fft_magnitude_with(&mut planner, samples, sample_rate, window)
}

/// As [`fft_magnitude`], reusing a caller-owned planner.
pub fn fft_magnitude_with<T: Real>(
    planner: &mut FftPlanner<T>,
    samples: &[T],
    sample_rate: f64,
    window: WindowFunction,
) -> Spectrum<T> {
    let n = samples.len().max(1).next_power_of_two();
    let coeffs = window.coefficients::<T>(samples.len());
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(n);
    buf.extend(
        samples
            .iter()
            .zip(&coeffs)
            .map(|(s, w)| Complex::new(*s * *w, T::zero())),
    );
    buf.resize(n, Complex::new(T::zero(), T::zero()));
    planner.plan_fft_forward(n).process(&mut buf);
    let magnitudes = buf[..=n / 2].iter().map(|c| c.norm()).collect();
    Spectrum {
        magnitudes,
        bin_width: T::of(sample_rate / n as f64),
        fft_len: n,
        window,
    }
}

/// A refined spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub frequency: T,
    pub magnitude: T,
}

/// The `count` largest local maxima inside `[lo, hi]`, strongest first.
pub fn track_peaks<T: Real>(spectrum: &Spectrum<T>, count: usize, band: (T, T)) -> Vec<Peak<T>> {
    let Some((first, last)) = spectrum.band_bins(band.0, band.1) else {
        return Vec::new();
    };
    let m = &spectrum.magnitudes;
    let first = first.max(1);
    let last = last.min(m.len().saturating_sub(2));
    let mut maxima: Vec<usize> = (first..=last)
        .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| m[b].partial_cmp(&m[a]).unwrap_or(std::cmp::Ordering::Equal));
    maxima
        .into_iter()
        .take(count)
        .map(|i| Peak {
            frequency: spectrum.frequency(spectrum.refine_peak(i)),
            magnitude: m[i],
        })
        .collect()
}

/// Frequency of the strongest bin in `band`, refined; `None` if the band is empty.
pub fn dominant_frequency<T: Real>(spectrum: &Spectrum<T>, band: (T, T)) -> Option<T> {
    let bin = spectrum.argmax_in_band(band.0, band.1)?;
    Some(spectrum.frequency(spectrum.refine_peak(bin)))
}

//! Additive noise augmentation at a prescribed per-channel SNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SNR_RANGE_DB: (f64, f64) = (5.0, 25.0);
pub const HUM_FREQUENCY: f64 = 60.0;
pub const HIGHBAND: (f64, f64) = (2000.0, 8000.0);
const PINK_ROWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Hum60,
    Highband,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::Hum60,
        NoiseKind::Highband,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Hum60 => "hum60",
            NoiseKind::Highband => "highband",
        }
    }

    /// Unscaled noise of this kind.
    pub fn generate<R: Rng + ?Sized>(self, len: usize, sample_rate: f64, rng: &mut R) -> Vec<f64> {
        match self {
            NoiseKind::White => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
            NoiseKind::Pink => voss_mccartney(len, rng),
            NoiseKind::Hum60 => {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let w = std::f64::consts::TAU * HUM_FREQUENCY / sample_rate;
                (0..len).map(|i| (w * i as f64 + phase).sin()).collect()
            }
            NoiseKind::Highband => band_limited_noise(len, sample_rate, HIGHBAND, rng),
        }
    }
}

/// Noise kind, target SNR and seed. An infinite SNR disables augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, snr_db: f64, seed: u64) -> Self {
        Self { kind, snr_db, seed }
    }

    pub fn disabled() -> Self {
        Self::new(NoiseKind::White, f64::INFINITY, 0)
    }

    pub fn is_disabled(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_disabled() {
            return Ok(());
        }
        let (lo, hi) = SNR_RANGE_DB;
        if !(self.snr_db >= lo && self.snr_db <= hi) {
            return Err(Error::config(
                "noise.snr_db",
                format!("must lie in [{lo}, {hi}] dB or be infinite, got {}", self.snr_db),
            ));
        }
        Ok(())
    }
}

/// Draws a `NoiseSpec` per window: kind uniformly from `kinds`, SNR uniformly
/// in `snr_db`, seed from a stream keyed by the sampler seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSampler {
    pub kinds: Vec<NoiseKind>,
    pub snr_db: (f64, f64),
    pub seed: u64,
}

impl NoiseSampler {
    /// All four kinds at one fixed SNR.
    pub fn mixed(snr_db: f64, seed: u64) -> Self {
        Self {
            kinds: NoiseKind::ALL.to_vec(),
            snr_db: (snr_db, snr_db),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::config("augmentation.kinds", "must name at least one kind"));
        }
        let (lo, hi) = self.snr_db;
        if lo > hi {
            return Err(Error::config("augmentation.snr_db", format!("lower {lo} exceeds upper {hi}")));
        }
        NoiseSpec::new(self.kinds[0], lo, 0).validate()?;
        NoiseSpec::new(self.kinds[0], hi, 0).validate()
    }

    /// Spec for the `index`-th augmented window; independent of call order.
    pub fn spec(&self, index: u64) -> NoiseSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let kind = self.kinds[rng.random_range(0..self.kinds.len())];
        let (lo, hi) = self.snr_db;
        let snr = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        NoiseSpec::new(kind, snr, rng.random())
    }
}

/// Voss-McCartney pink noise: a sum of white rows, row `k` refreshed every
/// `2^k` samples, plus a per-sample white term.
pub fn voss_mccartney<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut rows: [f64; PINK_ROWS] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let mut sum: f64 = rows.iter().sum();
    let mut out = Vec::with_capacity(len);
    for counter in 1..=len as u64 {
        let row = counter.trailing_zeros() as usize;
        if row < PINK_ROWS {
            let fresh: f64 = rng.sample(StandardNormal);
            sum += fresh - rows[row];
            rows[row] = fresh;
        }
        let white: f64 = rng.sample(StandardNormal);
        out.push(sum + white);
    }
    out
}

/// Gaussian noise confined to `band` by construction in the frequency domain.
pub fn band_limited_noise<R: Rng + ?Sized>(
    len: usize,
    sample_rate: f64,
    band: (f64, f64),
    rng: &mut R,
) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let bin_width = sample_rate / len as f64;
    let lo = ((band.0 / bin_width).ceil() as usize).max(1);
    let hi = ((band.1 / bin_width).floor() as usize).min((len - 1) / 2);
    let mut spectrum = vec![Complex::new(0.0, 0.0); len];
    for k in lo..=hi {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spectrum[k] = Complex::new(re, im);
        spectrum[len - k] = Complex::new(re, -im);
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut spectrum);
    spectrum.into_iter().map(|c| c.re).collect()
}

pub fn mean_power<T: Real>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / x.len() as f64
}

/// Adds noise scaled so each channel's SNR equals `spec.snr_db` exactly.
/// Sample count and rate are untouched.
pub fn augment_noise<T: Real>(window: &StereoAudio<T>, spec: &NoiseSpec) -> Result<StereoAudio<T>> {
    spec.validate()?;
    if spec.is_disabled() {
        return Ok(window.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut channels = [window.left.clone(), window.right.clone()];
    for (idx, channel) in channels.iter_mut().enumerate() {
        let signal = mean_power(channel);
        if !(signal > 0.0) || !signal.is_finite() {
            return Err(Error::Augmentation(format!(
                "channel {} has signal power {signal}; SNR is undefined",
                idx + 1
            )));
        }
        let noise = spec.kind.generate(channel.len(), window.sample_rate, &mut rng);
        let raw = mean_power(&noise);
        if !(raw > 0.0) {
            return Err(Error::Augmentation(format!(
                "{} noise of {} samples has no power",
                spec.kind.name(),
                channel.len()
            )));
        }
        let scale = (signal / raw / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        for (v, n) in channel.iter_mut().zip(&noise) {
            *v = *v + T::of(n * scale);
        }
    }
    let [left, right] = channels;
    StereoAudio::new(window.sample_rate, left, right)
}

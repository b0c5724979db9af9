//! Harmonic band-energy features in four groups: per-channel log energies,
//! their difference, and the inter-channel energy ratio.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::physics::StringParams;
use crate::scalar::Real;
use crate::spectral::{fft_magnitude_with, Spectrum, WindowFunction};

pub const EXTRACTOR_VERSION: u32 = 1;
pub const DEFAULT_HARMONICS: usize = 16;
pub const DEFAULT_REL_HALFWIDTH: f64 = 0.03;
pub const ENERGY_FLOOR: f64 = 1e-12;
/// Ratios are clamped to `[1/RATIO_BOUND, RATIO_BOUND]`.
pub const RATIO_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Mic1,
    Mic2,
    Difference,
    Ratio,
}

impl FeatureGroup {
    pub const ORDER: [FeatureGroup; 4] = [
        FeatureGroup::Mic1,
        FeatureGroup::Mic2,
        FeatureGroup::Difference,
        FeatureGroup::Ratio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Mic1 => "mic1",
            FeatureGroup::Mic2 => "mic2",
            FeatureGroup::Difference => "difference",
            FeatureGroup::Ratio => "ratio",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Band placement reference, Hz. Normally the open-string fundamental.
    pub fundamental: f64,
    pub harmonics: usize,
    /// Band half-width relative to the harmonic frequency.
    pub rel_halfwidth: f64,
    /// Equal-width sub-bands per harmonic band.
    pub sub_bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let f0 = StringParams::<f64>::reference()
            .open_fundamental()
            .expect("reference string is valid");
        Self::for_fundamental(f0)
    }
}

impl FeatureConfig {
    pub fn for_fundamental(fundamental: f64) -> Self {
        Self {
            fundamental,
            harmonics: DEFAULT_HARMONICS,
            rel_halfwidth: DEFAULT_REL_HALFWIDTH,
            sub_bins: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fundamental > 0.0 && self.fundamental.is_finite()) {
            return Err(Error::config("features.fundamental", format!("must be > 0, got {}", self.fundamental)));
        }
        if self.harmonics == 0 {
            return Err(Error::config("features.harmonics", "must be >= 1"));
        }
        if !(self.rel_halfwidth > 0.0 && self.rel_halfwidth < 0.5) {
            return Err(Error::config(
                "features.rel_halfwidth",
                format!("must lie in (0, 0.5), got {}", self.rel_halfwidth),
            ));
        }
        if self.sub_bins == 0 {
            return Err(Error::config("features.sub_bins", "must be >= 1"));
        }
        Ok(())
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            harmonics: self.harmonics,
            sub_bins: self.sub_bins,
        }
    }

    pub fn dimension(&self) -> usize {
        self.layout().len()
    }

    /// SHA-256 over everything that determines what each position means.
    pub fn layout_hash(&self) -> String {
        let descriptor = format!(
            "string-tactile-features v{EXTRACTOR_VERSION};groups=mic1,mic2,difference,ratio;\
             harmonics={};sub_bins={};fundamental={:e};rel_halfwidth={:e};window=hann;floor={:e};ratio_bound={:e}",
            self.harmonics, self.sub_bins, self.fundamental, self.rel_halfwidth, ENERGY_FLOOR, RATIO_BOUND
        );
        hex::encode(Sha256::digest(descriptor.as_bytes()))
    }
}

/// Position map: `group`-major, then harmonic, then sub-band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub harmonics: usize,
    pub sub_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSlot {
    pub group: FeatureGroup,
    /// 1-based harmonic number.
    pub harmonic: usize,
    pub sub_bin: usize,
}

impl FeatureLayout {
    pub fn per_group(&self) -> usize {
        self.harmonics * self.sub_bins
    }

    pub fn len(&self) -> usize {
        4 * self.per_group()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, slot: FeatureSlot) -> Option<usize> {
        if slot.harmonic == 0 || slot.harmonic > self.harmonics || slot.sub_bin >= self.sub_bins {
            return None;
        }
        Some(slot.group.index() * self.per_group() + (slot.harmonic - 1) * self.sub_bins + slot.sub_bin)
    }

    pub fn slot(&self, position: usize) -> Option<FeatureSlot> {
        if position >= self.len() {
            return None;
        }
        let per = self.per_group();
        let within = position % per;
        Some(FeatureSlot {
            group: FeatureGroup::ORDER[position / per],
            harmonic: within / self.sub_bins + 1,
            sub_bin: within % self.sub_bins,
        })
    }

    /// Column names such as `mic1_h03` or `ratio_h16_s1`.
    pub fn names(&self) -> Vec<String> {
        (0..self.len())
            .filter_map(|p| self.slot(p))
            .map(|s| {
                if self.sub_bins == 1 {
                    format!("{}_h{:02}", s.group.name(), s.harmonic)
                } else {
                    format!("{}_h{:02}_s{}", s.group.name(), s.harmonic, s.sub_bin)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandEnergies<T> {
    /// `harmonics * sub_bins` energies, harmonic-major.
    pub values: Vec<T>,
    /// Set when some band reaches past Nyquist; those entries are zero.
    pub truncated: bool,
}

/// Sum of squared magnitudes over bins within `[n f0 (1 - w), n f0 (1 + w)]`
/// for `n = 1..=harmonics`, each band optionally split into `sub_bins` equal parts.
pub fn harmonic_band_energies<T: Real>(
    spectrum: &Spectrum<T>,
    fundamental: f64,
    harmonics: usize,
    rel_halfwidth: f64,
    sub_bins: usize,
) -> BandEnergies<T> {
    let sub_bins = sub_bins.max(1);
    let bw = spectrum.bin_width.as_f64();
    let nyquist = (spectrum.magnitudes.len() - 1) as f64 * bw;
    let mut values = vec![T::zero(); harmonics * sub_bins];
    let mut truncated = false;
    for n in 1..=harmonics {
        let centre = n as f64 * fundamental;
        let (lo, hi) = (centre * (1.0 - rel_halfwidth), centre * (1.0 + rel_halfwidth));
        if hi > nyquist {
            truncated = true;
            continue;
        }
        let first = (lo / bw).ceil() as usize;
        let last = (hi / bw).floor() as usize;
        for k in first..=last.min(spectrum.magnitudes.len() - 1) {
            let f = k as f64 * bw;
            let sub = (((f - lo) / (hi - lo)) * sub_bins as f64).floor() as usize;
            let idx = (n - 1) * sub_bins + sub.min(sub_bins - 1);
            let m = spectrum.magnitudes[k];
            values[idx] = values[idx] + m * m;
        }
    }
    BandEnergies { values, truncated }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub truncated: bool,
}

/// Reusable extractor holding its FFT planner.
pub struct FeatureExtractor<T: Real> {
    config: FeatureConfig,
    planner: FftPlanner<T>,
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            planner: FftPlanner::new(),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn extract(&mut self, window: &StereoAudio<T>) -> Result<FeatureVector<T>> {
        let cfg = self.config;
        for (ch, samples) in [&window.left, &window.right].into_iter().enumerate() {
            if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::Feature(format!(
                    "channel {} sample {i} is not finite ({})",
                    ch + 1,
                    samples[i]
                )));
            }
        }
        if window.frames() == 0 {
            return Err(Error::Feature("empty window".into()));
        }
        let bands = |planner: &mut FftPlanner<T>, x: &[T]| {
            let s = fft_magnitude_with(planner, x, window.sample_rate, WindowFunction::Hann);
            harmonic_band_energies(&s, cfg.fundamental, cfg.harmonics, cfg.rel_halfwidth, cfg.sub_bins)
        };
        let e1 = bands(&mut self.planner, &window.left);
        let e2 = bands(&mut self.planner, &window.right);
        let eps = T::of(ENERGY_FLOOR);
        let (lo, hi) = (T::of(1.0 / RATIO_BOUND), T::of(RATIO_BOUND));
        let per = e1.values.len();
        let mut values = Vec::with_capacity(4 * per);
        values.extend(e1.values.iter().map(|e| (eps + *e).ln()));
        values.extend(e2.values.iter().map(|e| (eps + *e).ln()));
        values.extend(
            e1.values
                .iter()
                .zip(&e2.values)
                .map(|(a, b)| (eps + *a).ln() - (eps + *b).ln()),
        );
        values.extend(
            e1.values
                .iter()
                .zip(&e2.values)
                .map(|(a, b)| ((*a + eps) / (*b + eps)).max(lo).min(hi)),
        );
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Feature(format!("feature {i} is not finite")));
        }
        Ok(FeatureVector {
            values,
            truncated: e1.truncated || e2.truncated,
        })
    }
}

/// One-shot convenience over [`FeatureExtractor`].
pub fn extract_fft_features<T: Real>(window: &StereoAudio<T>, config: &FeatureConfig) -> Result<FeatureVector<T>> {
    FeatureExtractor::new(*config)?.extract(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fft_magnitude;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::TAU;

    const SR: f64 = 44_100.0;
    const F0: f64 = 243.252_127_705_26;

    fn sine(f: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| amp * (TAU * f * i as f64 / SR).sin()).collect()
    }

    fn stereo(left: Vec<f64>, right: Vec<f64>) -> StereoAudio<f64> {
        StereoAudio::new(SR, left, right).unwrap()
    }

    #[test]
    fn default_fundamental_is_open_string() {
        let cfg = FeatureConfig::default();
        assert!((cfg.fundamental - F0).abs() < 1e-9);
        assert_eq!(cfg.dimension(), 64);
    }

    #[test]
    fn second_harmonic_sine_lands_in_element_one() {
        let s = fft_magnitude(&sine(2.0 * F0, 1.0, 4410), SR, WindowFunction::Hann);
        let e = harmonic_band_energies(&s, F0, 16, 0.03, 1);
        let total: f64 = e.values.iter().sum();
        assert!(e.values[1] / total >= 0.99, "{:?}", e.values);
        assert!(!e.truncated);
    }

    #[test]
    fn zero_spectrum_gives_zero_energies() {
        let s = fft_magnitude(&vec![0.0; 4410], SR, WindowFunction::Hann);
        let e = harmonic_band_energies(&s, F0, 16, 0.03, 1);
        assert!(e.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn band_energy_matches_direct_sum() {
        let x = sine(3.0 * F0 + 5.0, 0.7, 4410);
        let s = fft_magnitude(&x, SR, WindowFunction::Hann);
        let e = harmonic_band_energies(&s, F0, 16, 0.03, 1);
        let (lo, hi) = (3.0 * F0 * 0.97, 3.0 * F0 * 1.03);
        let direct: f64 = s
            .magnitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * s.bin_width;
                f >= lo && f <= hi
            })
            .map(|(_, m)| m * m)
            .sum();
        assert!((e.values[2] - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn white_noise_energy_grows_with_band_width() {
        // Expected energy per band is (bins in band) * E|X_k|^2.
        let mut acc = [0.0; 16];
        let seeds = 240;
        let mut spec = None;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..4410).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = fft_magnitude(&x, SR, WindowFunction::Hann);
            let e = harmonic_band_energies(&s, F0, 16, 0.03, 1);
            acc.iter_mut().zip(&e.values).for_each(|(a, v)| *a += v / seeds as f64);
            spec = Some(s);
        }
        let s = spec.unwrap();
        let per_bin: Vec<f64> = (1..=16)
            .map(|n| {
                let (a, b) = s.band_bins(n as f64 * F0 * 0.97, n as f64 * F0 * 1.03).unwrap();
                acc[n - 1] / (b - a + 1) as f64
            })
            .collect();
        let mean = per_bin.iter().sum::<f64>() / 16.0;
        for (n, p) in per_bin.iter().enumerate() {
            assert!((p / mean - 1.0).abs() < 0.25, "band {}: {}", n + 1, p / mean);
        }
        // bins per band track n * 2 w f0 / bin_width to within one bin
        for n in 1..=16 {
            let (a, b) = s.band_bins(n as f64 * F0 * 0.97, n as f64 * F0 * 1.03).unwrap();
            let ideal = n as f64 * 0.06 * F0 / s.bin_width;
            assert!(((b - a + 1) as f64 - ideal).abs() <= 1.0);
        }
        assert!(acc[15] > 5.0 * acc[0]);
    }

    #[test]
    fn bands_past_nyquist_are_flagged() {
        let sr = 4000.0;
        let x: Vec<f64> = (0..400).map(|i| (TAU * 300.0 * i as f64 / sr).sin()).collect();
        let s = fft_magnitude(&x, sr, WindowFunction::Hann);
        let e = harmonic_band_energies(&s, F0, 16, 0.03, 1);
        assert!(e.truncated);
        assert_eq!(e.values[15], 0.0);
        assert!(e.values[0] > 0.0);
    }

    #[test]
    fn identical_channels() {
        let x = sine(F0, 0.5, 4410);
        let f = extract_fft_features(&stereo(x.clone(), x), &FeatureConfig::default()).unwrap();
        assert!(f.values[32..48].iter().all(|v| *v == 0.0));
        assert!(f.values[48..64].iter().all(|v| *v == 1.0));
        let silent = extract_fft_features(&stereo(vec![0.0; 4410], vec![0.0; 4410]), &FeatureConfig::default()).unwrap();
        assert!(silent.values[48..64].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn doubled_second_channel_gives_quarter_ratio() {
        let x: Vec<f64> = (0..4410)
            .map(|i| (1..=16).map(|n| (TAU * n as f64 * F0 * i as f64 / SR).sin()).sum())
            .collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let f = extract_fft_features(&stereo(x, y), &FeatureConfig::default()).unwrap();
        for r in &f.values[48..64] {
            assert!((r - 0.25).abs() < 1e-9, "{r}");
        }
        for d in &f.values[32..48] {
            assert!((d + 4f64.ln()).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut x = sine(F0, 1.0, 4410);
        x[17] = f64::NAN;
        let err = extract_fft_features(&stereo(x, vec![0.0; 4410]), &FeatureConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Feature(_)));
        let mut y = vec![0.0; 4410];
        y[0] = f64::INFINITY;
        assert!(extract_fft_features(&stereo(vec![0.0; 4410], y), &FeatureConfig::default()).is_err());
    }

    #[test]
    fn quiet_noise_barely_moves_features() {
        // every band occupied, channels at similar level so ratios sit near 1
        let rich = |phase: f64| -> Vec<f64> {
            (0..4410)
                .map(|i| (1..=16).map(|n| (TAU * n as f64 * F0 * i as f64 / SR + phase * n as f64).sin()).sum())
                .collect()
        };
        let clean = stereo(rich(1.0), rich(2.0));
        let noisy = crate::spectral::noise::augment_noise(
            &clean,
            &crate::spectral::noise::NoiseSpec::new(crate::spectral::noise::NoiseKind::White, 25.0, 1),
        )
        .unwrap();
        // scale the added noise down a further 35 dB to sit 60 dB below
        let k = 10f64.powf(-35.0 / 20.0);
        let quiet = stereo(
            clean.left.iter().zip(&noisy.left).map(|(c, n)| c + k * (n - c)).collect(),
            clean.right.iter().zip(&noisy.right).map(|(c, n)| c + k * (n - c)).collect(),
        );
        let cfg = FeatureConfig::default();
        let a = extract_fft_features(&clean, &cfg).unwrap();
        let b = extract_fft_features(&quiet, &cfg).unwrap();
        let linf = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(linf < 1e-3, "{linf}");
    }

    #[test]
    fn layout_hash_tracks_configuration() {
        let a = FeatureConfig::default();
        let mut b = a;
        b.rel_halfwidth = 0.04;
        assert_eq!(a.layout_hash(), FeatureConfig::default().layout_hash());
        assert_ne!(a.layout_hash(), b.layout_hash());
        assert_eq!(a.layout_hash().len(), 64);
    }

    #[test]
    fn sub_bins_split_the_band() {
        let cfg = FeatureConfig {
            sub_bins: 3,
            ..FeatureConfig::default()
        };
        let x = sine(2.0 * F0, 1.0, 4410);
        let f = extract_fft_features(&stereo(x.clone(), x), &cfg).unwrap();
        assert_eq!(f.values.len(), 4 * 16 * 3);
        let names = cfg.layout().names();
        assert_eq!(names[3], "mic1_h02_s0");
        assert_eq!(names.len(), 192);
    }

    proptest! {
        #[test]
        fn layout_is_a_bijection(harmonics in 1usize..24, sub_bins in 1usize..5) {
            let layout = FeatureLayout { harmonics, sub_bins };
            let mut seen = std::collections::HashSet::new();
            for p in 0..layout.len() {
                let slot = layout.slot(p).unwrap();
                prop_assert_eq!(layout.position(slot), Some(p));
                prop_assert!(seen.insert(slot));
            }
            prop_assert!(layout.slot(layout.len()).is_none());
            for group in FeatureGroup::ORDER {
                for harmonic in 1..=harmonics {
                    for sub_bin in 0..sub_bins {
                        let slot = FeatureSlot { group, harmonic, sub_bin };
                        prop_assert!(seen.contains(&slot));
                    }
                }
            }
        }

        #[test]
        fn extraction_is_deterministic_and_finite(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..4410).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..4410).map(|_| { let v: f64 = StandardNormal.sample(&mut rng); 0.1 * v }).collect();
            let w = stereo(x, y);
            let a = extract_fft_features(&w, &FeatureConfig::default()).unwrap();
            let b = extract_fft_features(&w, &FeatureConfig::default()).unwrap();
            prop_assert!(a.values.iter().all(|v| v.is_finite()));
            prop_assert_eq!(a, b);
        }
    }
}

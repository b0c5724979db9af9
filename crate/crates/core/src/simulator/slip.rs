//! Stochastic excitation standing in for stick-slip micro-vibration.
//!
//! This is a modelling extension: a zero-mean force, band-limited to
//! 2-8 kHz, applied to the node next to the clamp on each segment. Its RMS is
//! proportional to the slip speed.

use rand::Rng;

use crate::physics::{ContactCondition, Side};
use crate::scalar::Real;
use crate::simulator::SegmentState;
use crate::spectral::noise::{band_limited_noise, mean_power};

pub const SLIP_BAND: (f64, f64) = (2000.0, 8000.0);

/// Pre-generated per-step slip force for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipExcitation<T> {
    forces: Vec<T>,
}

impl<T: Real> SlipExcitation<T> {
    pub fn silent(steps: usize) -> Self {
        Self {
            forces: vec![T::zero(); steps],
        }
    }

    /// Draws `steps` samples at rate `1/dt`. `gain` is the RMS force in
    /// newtons per m/s of slip speed. A non-slipping contact gives silence.
    pub fn generate<R: Rng + ?Sized>(
        contact: &ContactCondition<T>,
        gain: T,
        steps: usize,
        dt: T,
        rng: &mut R,
    ) -> Self {
        let target_rms = gain * contact.slip_speed;
        if !contact.slipping || steps == 0 || target_rms == T::zero() {
            return Self::silent(steps);
        }
        let raw = band_limited_noise(steps, 1.0 / dt.as_f64(), SLIP_BAND, rng);
        let power = mean_power(&raw);
        let scale = if power > 0.0 {
            target_rms.as_f64() / power.sqrt()
        } else {
            0.0
        };
        Self {
            forces: raw.into_iter().map(|v| T::of(v * scale)).collect(),
        }
    }

    pub fn force(&self, step: usize) -> T {
        self.forces.get(step).copied().unwrap_or_else(T::zero)
    }

    pub fn samples(&self) -> &[T] {
        &self.forces
    }
}

/// Node adjacent to the clamp: the last interior node of the first segment,
/// the first interior node of the second.
pub fn clamp_adjacent_node<T: Real>(state: &SegmentState<T>, side: Side) -> usize {
    match side {
        Side::First => state.node_count() - 2,
        Side::Second => 1,
    }
}

/// Adds the slip force for `step` into the per-node force buffer. A no-op
/// unless the contact is slipping.
pub fn inject_slip_excitation<T: Real>(
    state: &SegmentState<T>,
    side: Side,
    contact: &ContactCondition<T>,
    excitation: &SlipExcitation<T>,
    step: usize,
    forces: &mut [T],
) {
    if !contact.slipping {
        return;
    }
    let node = clamp_adjacent_node(state, side);
    forces[node] = forces[node] + excitation.force(step);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fft_magnitude, WindowFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn slipping(speed: f64) -> ContactCondition<f64> {
        ContactCondition::sliding(0.2, 1.0, speed)
    }

    #[test]
    fn zero_speed_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = slipping(0.01);
        c.slip_speed = 0.0;
        let e = SlipExcitation::generate(&c, 2.0, 10_000, 1e-6, &mut rng);
        assert!(e.samples().iter().all(|v| *v == 0.0));
        let stick = ContactCondition::pressed(0.2, 1.0);
        let e = SlipExcitation::generate(&stick, 2.0, 10_000, 1e-6, &mut rng);
        assert!(e.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_same_sequence() {
        let a = SlipExcitation::generate(&slipping(0.03), 1.0, 50_000, 1e-6, &mut ChaCha8Rng::seed_from_u64(9));
        let b = SlipExcitation::generate(&slipping(0.03), 1.0, 50_000, 1e-6, &mut ChaCha8Rng::seed_from_u64(9));
        let c = SlipExcitation::generate(&slipping(0.03), 1.0, 50_000, 1e-6, &mut ChaCha8Rng::seed_from_u64(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rms_tracks_slip_speed() {
        let e = SlipExcitation::generate(&slipping(0.03), 2.0, 40_000, 1e-6, &mut ChaCha8Rng::seed_from_u64(4));
        let rms = (e.samples().iter().map(|v| v * v).sum::<f64>() / 40_000.0).sqrt();
        assert!((rms - 0.06).abs() < 1e-12, "{rms}");
        let mean = e.samples().iter().sum::<f64>() / 40_000.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn power_is_in_band() {
        let e = SlipExcitation::generate(&slipping(0.03), 1.0, 200_000, 1e-6, &mut ChaCha8Rng::seed_from_u64(5));
        let s = fft_magnitude(e.samples(), 1.0e6, WindowFunction::Hann);
        let (lo, hi) = s.band_bins(SLIP_BAND.0, SLIP_BAND.1).unwrap();
        let total: f64 = s.magnitudes.iter().map(|m| m * m).sum();
        let inside: f64 = s.magnitudes[lo..=hi].iter().map(|m| m * m).sum();
        assert!(inside / total >= 0.9, "{}", inside / total);
    }

    #[test]
    fn injection_targets_clamp_neighbour() {
        let state = SegmentState::<f64>::at_rest(0.3, 16, 1e-6).unwrap();
        let c = slipping(0.02);
        let e = SlipExcitation::generate(&c, 1.0, 100, 1e-6, &mut ChaCha8Rng::seed_from_u64(2));
        let mut forces = vec![0.0; 16];
        inject_slip_excitation(&state, Side::First, &c, &e, 7, &mut forces);
        assert_eq!(forces[14], e.force(7));
        let mut forces2 = vec![0.0; 16];
        inject_slip_excitation(&state, Side::Second, &c, &e, 7, &mut forces2);
        assert_eq!(forces2[1], e.force(7));
        let mut untouched = vec![0.0; 16];
        inject_slip_excitation(&state, Side::First, &ContactCondition::pressed(0.2, 1.0), &e, 7, &mut untouched);
        assert!(untouched.iter().all(|v| *v == 0.0));
    }
}

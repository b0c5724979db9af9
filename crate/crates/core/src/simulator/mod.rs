//! Explicit finite-difference simulation of a string split by a clamping
//! contact, each segment sustained by its own feedback-tuned driver.
//!
//! The run proceeds at the integration rate `1/dt` (1 MHz for the reference
//! configuration). Each segment's pickup velocity is recorded every step, the
//! two traces are cross-mixed into the microphone channels, low-passed at
//! 20 kHz and resampled to the audio rate, then peak-normalized.

mod drive;
mod mixing;
mod resample;
mod segment;
mod slip;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use drive::{
    drive_force_at_node, drive_profile, trailing_phase, update_drive_frequency, DriveConfig,
    FrequencyTracker,
};
pub use mixing::{mix_channels, MixingConfig};
pub use resample::Resampler;
pub use segment::{discrete_energy, DampingModel, SegmentState, StepCoefficients};
pub use slip::{clamp_adjacent_node, inject_slip_excitation, SlipExcitation, SLIP_BAND};

pub use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::physics::{
    effective_tension, max_stable_timestep, segment_damping, split_lengths, wave_speed,
    ContactCondition, Side, StringParams,
};
use crate::scalar::Real;

/// Peak level of the normalized output.
pub const OUTPUT_PEAK: f64 = 0.9;

/// Which signal each driver's frequency feedback listens to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    /// Each driver tracks its own segment's pickup.
    OwnSegment,
    /// Both drivers track the first mixed microphone channel.
    MixedFirstChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig<T: Real> {
    pub string: StringParams<T>,
    pub contact: ContactCondition<T>,
    /// Driver of segment 1 (or of the whole string without contact) and of segment 2.
    pub drives: [DriveConfig<T>; 2],
    pub mixing: MixingConfig<T>,
    /// Nodes per segment, including both pinned ends.
    pub nodes: usize,
    /// Integration step, s.
    pub timestep: T,
    /// Simulated time, s.
    pub duration: T,
    /// Pickup location on each segment as a fraction of its length.
    pub pickup_positions: [T; 2],
    pub output_sample_rate: f64,
    pub seed: u64,
    /// Peak of the initial triangular displacement, m.
    pub pluck_amplitude: T,
    pub damping_model: DampingModel,
    pub feedback_source: FeedbackSource,
    /// RMS slip force per unit slip speed, N/(m/s).
    pub slip_gain: T,
    pub lowpass_cutoff: f64,
    pub lowpass_taps: usize,
}

impl<T: Real> Default for SimulationConfig<T> {
    fn default() -> Self {
        Self::reference()
    }
}

impl<T: Real> SimulationConfig<T> {
    /// The convergence-example setup: contact at x/L = 0.35 with no force,
    /// 256 nodes per segment, 1 us steps for 400 ms, unmixed pickups.
    pub fn reference() -> Self {
        let string = StringParams::reference();
        Self {
            contact: ContactCondition::pressed(T::of(0.35) * string.total_length, T::zero()),
            string,
            drives: [DriveConfig::default(); 2],
            mixing: MixingConfig::identity(),
            nodes: 256,
            timestep: T::of(1.0e-6),
            duration: T::of(0.4),
            pickup_positions: [T::of(0.85); 2],
            output_sample_rate: 44_100.0,
            seed: 0,
            pluck_amplitude: T::of(1.0e-4),
            damping_model: DampingModel::PerLength,
            feedback_source: FeedbackSource::OwnSegment,
            slip_gain: T::of(0.05),
            lowpass_cutoff: 20_000.0,
            lowpass_taps: 255,
        }
    }

    /// Lengths of the simulated segments: two with contact, one without.
    pub fn segment_lengths(&self) -> Result<Vec<T>> {
        if self.contact.in_contact {
            let g = split_lengths(self.contact.location, &self.string)?;
            Ok(vec![g.first, g.second])
        } else {
            Ok(vec![self.string.total_length])
        }
    }

    pub fn tension(&self) -> Result<T> {
        effective_tension(self.contact.force, &self.string)
    }

    /// Expected fundamental of each simulated segment.
    pub fn predicted_fundamentals(&self) -> Result<Vec<T>> {
        let v = wave_speed(self.tension()?, self.string.linear_density)?;
        Ok(self
            .segment_lengths()?
            .into_iter()
            .map(|l| v / (T::of(2.0) * l))
            .collect())
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.timestep).round().as_f64() as usize
    }

    pub fn output_frames(&self) -> usize {
        (self.duration.as_f64() * self.output_sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.string.validate()?;
        self.contact.validate(self.string.total_length)?;
        self.mixing.validate()?;
        for (k, d) in self.drives.iter().enumerate() {
            d.validate(&format!("simulation.drives[{k}]"))?;
        }
        if self.nodes < 3 {
            return Err(Error::config("simulation.nodes", format!("need >= 3, got {}", self.nodes)));
        }
        if !(self.timestep > T::zero()) {
            return Err(Error::config("simulation.timestep", "must be > 0"));
        }
        if !(self.duration > T::zero()) {
            return Err(Error::config("simulation.duration", "must be > 0"));
        }
        for (k, d) in self.drives.iter().enumerate() {
            if self.duration < d.feedback_window {
                return Err(Error::config(
                    "simulation.duration",
                    format!(
                        "{} s is shorter than the feedback window {} s of drive {k}",
                        self.duration, d.feedback_window
                    ),
                ));
            }
        }
        for (k, p) in self.pickup_positions.iter().enumerate() {
            if !(*p > T::zero() && *p < T::one()) {
                return Err(Error::config(
                    format!("simulation.pickup_positions[{k}]"),
                    format!("must lie in (0, 1), got {p}"),
                ));
            }
        }
        let internal_rate = 1.0 / self.timestep.as_f64();
        if !(self.output_sample_rate > 0.0 && self.output_sample_rate <= internal_rate) {
            return Err(Error::config(
                "simulation.output_sample_rate",
                format!(
                    "must lie in (0, 1/timestep = {internal_rate}], got {}",
                    self.output_sample_rate
                ),
            ));
        }
        if !(self.pluck_amplitude >= T::zero()) || !self.pluck_amplitude.is_finite() {
            return Err(Error::config("simulation.pluck_amplitude", "must be finite and >= 0"));
        }
        if !(self.slip_gain >= T::zero()) {
            return Err(Error::config("simulation.slip_gain", "must be >= 0"));
        }
        if !(self.lowpass_cutoff > 0.0 && self.lowpass_cutoff < 0.5 * internal_rate) {
            return Err(Error::config("simulation.lowpass_cutoff", "must lie below the integration Nyquist rate"));
        }
        if self.lowpass_taps < 3 {
            return Err(Error::config("simulation.lowpass_taps", "need >= 3 taps"));
        }
        self.check_stability()
    }

    /// Rejects time steps at or above the CFL bound of either segment.
    pub fn check_stability(&self) -> Result<()> {
        let v = wave_speed(self.tension()?, self.string.linear_density)?;
        for (k, len) in self.segment_lengths()?.into_iter().enumerate() {
            let spacing = len / T::of((self.nodes - 1) as f64);
            let bound = max_stable_timestep(spacing, v, self.string.cfl_factor)?;
            if !(self.timestep < bound) {
                return Err(Error::config(
                    "simulation.timestep",
                    format!(
                        "{} s violates the stability bound {:.4e} s of segment {} (length {} m)",
                        self.timestep,
                        bound.as_f64(),
                        k + 1,
                        len
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Builds the at-rest, plucked segments for `config`.
///
/// With contact there are two segments split at the contact point; without,
/// a single full-length segment. Each carries a triangular pluck centred on
/// its drive location.
pub fn init_segments<T: Real>(config: &SimulationConfig<T>) -> Result<Vec<SegmentState<T>>> {
    config.check_stability()?;
    config
        .segment_lengths()?
        .into_iter()
        .enumerate()
        .map(|(k, len)| {
            let mut seg = SegmentState::at_rest(len, config.nodes, config.timestep)?;
            seg.pluck(config.drives[k].center * len, config.pluck_amplitude);
            Ok(seg)
        })
        .collect()
}

/// Everything a run produces beyond the microphone channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput<T> {
    /// Normalized, mixed microphone channels at the output rate.
    pub audio: StereoAudio<T>,
    /// Unmixed pickup velocities (m/s) at the output rate.
    pub pickups: StereoAudio<T>,
    /// `(time, frequency per driver)` after each feedback update.
    pub drive_history: Vec<(f64, Vec<T>)>,
    /// Gain applied during peak normalization.
    pub normalization: T,
}

pub fn simulate_contact<T: Real>(config: &SimulationConfig<T>) -> Result<StereoAudio<T>> {
    Ok(simulate(config)?.audio)
}

struct Driver<T> {
    profile: Vec<T>,
    frequency: T,
    phase: T,
    amplitude: T,
}

pub fn simulate<T: Real>(config: &SimulationConfig<T>) -> Result<SimulationOutput<T>> {
    config.validate()?;
    let mut segments = init_segments(config)?;
    let tension = config.tension()?;
    let mu = config.string.linear_density;
    let steps = config.step_count();
    let dt = config.timestep;
    let internal_rate = 1.0 / dt.as_f64();
    let open = config.string.open_fundamental()?;

    let sides = [Side::First, Side::Second];
    let mut coeffs = Vec::with_capacity(segments.len());
    let mut drivers = Vec::with_capacity(segments.len());
    let mut pickups = Vec::with_capacity(segments.len());
    let mut slips = Vec::with_capacity(segments.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (k, seg) in segments.iter().enumerate() {
        let damping = segment_damping(config.contact.force, sides[k], &config.string)?;
        coeffs.push(StepCoefficients::new(seg, tension, mu, damping, config.damping_model));
        let d = &config.drives[k];
        let len = seg.length();
        drivers.push(Driver {
            profile: (0..seg.node_count())
                .map(|i| drive_profile(seg.position(i), d.center * len, d.width * len))
                .collect(),
            frequency: d.initial_frequency.unwrap_or(open),
            // A released pluck moves as -sin, so start the force in step with it.
            phase: T::PI(),
            amplitude: d.amplitude,
        });
        pickups.push(seg.nearest_node(config.pickup_positions[k]));
        slips.push(SlipExcitation::generate(&config.contact, config.slip_gain, steps, dt, &mut rng));
    }

    let mut traces: Vec<Vec<T>> = segments.iter().map(|_| Vec::with_capacity(steps)).collect();
    let mut forces: Vec<Vec<T>> = segments.iter().map(|s| vec![T::zero(); s.node_count()]).collect();
    let mut planner = FftPlanner::new();
    let schedule: Vec<(usize, usize, FrequencyTracker<T>)> = (0..segments.len())
        .map(|k| {
            let d = &config.drives[k];
            let window = (d.feedback_window.as_f64() * internal_rate).round() as usize;
            let period = ((d.feedback_period.as_f64() * internal_rate).round() as usize).max(1);
            (window, period, FrequencyTracker::new(d.feedback_band, internal_rate))
        })
        .collect();
    let mut history = Vec::new();
    let mut mixed_window: Vec<T> = Vec::new();

    for step in 0..steps {
        let t = T::of(step as f64 * dt.as_f64());
        for k in 0..segments.len() {
            let drv = &drivers[k];
            let s = drv.amplitude * (T::TAU() * drv.frequency * t + drv.phase).sin();
            for (f, g) in forces[k].iter_mut().zip(&drv.profile) {
                *f = s * *g;
            }
            inject_slip_excitation(&segments[k], sides[k], &config.contact, &slips[k], step, &mut forces[k]);
            segments[k].step(&coeffs[k], &forces[k]).map_err(|e| match e {
                Error::Integration { step, time, .. } => Error::Integration {
                    segment: k + 1,
                    step,
                    time,
                },
                other => other,
            })?;
            traces[k].push(segments[k].velocity(pickups[k]));
        }

        let done = step + 1;
        let mut updated = false;
        for k in 0..segments.len() {
            let (window, period, tracker) = &schedule[k];
            if done % period != 0 || done < *window {
                continue;
            }
            let recent: &[T] = match (config.feedback_source, traces.len()) {
                (FeedbackSource::MixedFirstChannel, 2) => {
                    mixed_window.clear();
                    let (a1, a2) = (&traces[0][done - window..], &traces[1][done - window..]);
                    mixed_window.extend(a1.iter().zip(a2).map(|(x, y)| config.mixing.mix(*x, *y).0));
                    &mixed_window
                }
                _ => &traces[k][done - window..],
            };
            let f = tracker.estimate(&mut planner, recent, drivers[k].frequency)?;
            // Force in phase with the sensed velocity, as a feedback coil would drive it.
            let phi = trailing_phase(recent, f, internal_rate);
            let t_end = T::of((done - 1) as f64 * dt.as_f64());
            drivers[k].frequency = f;
            drivers[k].phase = (phi + T::FRAC_PI_2() - T::TAU() * f * t_end) % T::TAU();
            updated = true;
        }
        if updated {
            history.push((done as f64 * dt.as_f64(), drivers.iter().map(|d| d.frequency).collect()));
        }
    }

    let (a1, a2) = if traces.len() == 2 {
        let second = traces.pop().expect("two traces");
        (traces.pop().expect("two traces"), second)
    } else {
        let only = traces.pop().expect("one trace");
        (only.clone(), only)
    };
    let (b1, b2) = mix_channels(&a1, &a2, &config.mixing)?;

    let resampler = Resampler::new(
        internal_rate,
        config.output_sample_rate,
        config.lowpass_cutoff,
        config.lowpass_taps,
    );
    let frames = config.output_frames();
    let mut channels = resampler.process_many(&[&b1, &b2, &a1, &a2], frames);
    let raw_right = channels.pop().expect("four channels");
    let raw_left = channels.pop().expect("four channels");
    let mut right = channels.pop().expect("four channels");
    let mut left = channels.pop().expect("four channels");
    let peak = left
        .iter()
        .chain(&right)
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let gain = if peak > T::zero() {
        T::of(OUTPUT_PEAK) / peak
    } else {
        T::one()
    };
    left.iter_mut().chain(right.iter_mut()).for_each(|v| *v = *v * gain);

    let pickups = StereoAudio::new(config.output_sample_rate, raw_left, raw_right)?;
    Ok(SimulationOutput {
        audio: StereoAudio::new(config.output_sample_rate, left, right)?,
        pickups,
        drive_history: history,
        normalization: gain,
    })
}

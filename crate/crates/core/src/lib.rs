//! Split-string tactile sensing: closed-form string physics, a feedback-driven
//! finite-difference simulator, harmonic-band audio features, and trainable
//! contact/slip/location/force heads.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod error;
pub mod inference;
pub mod io;
pub mod physics;
pub mod scalar;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StringParamsF64 = physics::StringParams<f64>;
pub type StringParamsF32 = physics::StringParams<f32>;
pub type ContactConditionF64 = physics::ContactCondition<f64>;
pub type ContactConditionF32 = physics::ContactCondition<f32>;
pub type SimulationConfigF64 = simulator::SimulationConfig<f64>;
pub type SimulationConfigF32 = simulator::SimulationConfig<f32>;
pub type StereoAudioF64 = audio::StereoAudio<f64>;
pub type StereoAudioF32 = audio::StereoAudio<f32>;
pub type SpectrumF64 = spectral::Spectrum<f64>;
pub type SpectrumF32 = spectral::Spectrum<f32>;

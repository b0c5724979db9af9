pub mod features;
mod fft;
pub mod noise;
mod spectrogram;
mod window;

pub use features::{
    extract_fft_features, harmonic_band_energies, BandEnergies, FeatureConfig, FeatureExtractor, FeatureGroup,
    FeatureLayout, FeatureSlot, FeatureVector,
};
pub use fft::{
    dominant_frequency, fft_magnitude, fft_magnitude_with, parabolic_offset, track_peaks, Peak,
    Spectrum, WindowFunction,
};
pub use noise::{augment_noise, NoiseKind, NoiseSampler, NoiseSpec};
pub use spectrogram::{spectrogram, Spectrogram};
pub use window::{sliding_windows, window_frames, AudioWindow, DEFAULT_WINDOW_SECONDS};

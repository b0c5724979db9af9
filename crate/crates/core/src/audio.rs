use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Two synchronized pickup channels at a common sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoAudio<T> {
    pub sample_rate: f64,
    pub left: Vec<T>,
    pub right: Vec<T>,
}

impl<T: Real> StereoAudio<T> {
    pub fn new(sample_rate: f64, left: Vec<T>, right: Vec<T>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Shape(format!(
                "channel lengths differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::config("sample_rate", "must be > 0"));
        }
        Ok(Self {
            sample_rate,
            left,
            right,
        })
    }

    pub fn silence(sample_rate: f64, frames: usize) -> Self {
        Self {
            sample_rate,
            left: vec![T::zero(); frames],
            right: vec![T::zero(); frames],
        }
    }

    pub fn frames(&self) -> usize {
        self.left.len()
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.sample_rate
    }

    pub fn channel(&self, index: usize) -> &[T] {
        if index == 0 {
            &self.left
        } else {
            &self.right
        }
    }

    /// Copies frames `[start, start + len)` into a new buffer.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            sample_rate: self.sample_rate,
            left: self.left[start..start + len].to_vec(),
            right: self.right[start..start + len].to_vec(),
        }
    }

    pub fn cast<U: Real>(&self) -> StereoAudio<U> {
        StereoAudio {
            sample_rate: self.sample_rate,
            left: self.left.iter().map(|v| U::of(v.as_f64())).collect(),
            right: self.right.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

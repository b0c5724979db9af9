//! Band-limited conversion from the integration rate to the audio rate.

use crate::scalar::Real;

/// Windowed-sinc low-pass evaluated at fractional input positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resampler {
    pub input_rate: f64,
    pub output_rate: f64,
    pub cutoff: f64,
    pub taps: usize,
}

impl Resampler {
    pub fn new(input_rate: f64, output_rate: f64, cutoff: f64, taps: usize) -> Self {
        Self {
            input_rate,
            output_rate,
            cutoff,
            taps: taps.max(3) | 1,
        }
    }

    fn kernel(&self, offset: f64, half: f64) -> f64 {
        // offset in input samples; Hann-windowed sinc
        if offset.abs() >= half {
            return 0.0;
        }
        let fc = self.cutoff / self.input_rate;
        let arg = 2.0 * fc * offset;
        let sinc = if arg == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
        };
        let w = 0.5 + 0.5 * (std::f64::consts::PI * offset / half).cos();
        2.0 * fc * sinc * w
    }

    /// Produces `frames` output samples; samples outside the input are zero.
    pub fn process<T: Real>(&self, input: &[T], frames: usize) -> Vec<T> {
        self.process_many(&[input], frames).pop().expect("one channel")
    }

    /// Resamples several equally long channels sharing one set of kernel weights.
    pub fn process_many<T: Real>(&self, inputs: &[&[T]], frames: usize) -> Vec<Vec<T>> {
        let half = (self.taps / 2 + 1) as f64;
        let ratio = self.input_rate / self.output_rate;
        let reach = (self.taps / 2) as i64;
        let len = inputs.first().map_or(0, |c| c.len()) as i64;
        let mut outputs: Vec<Vec<T>> = inputs.iter().map(|_| Vec::with_capacity(frames)).collect();
        let mut weights = Vec::with_capacity(self.taps);
        let mut acc = vec![0.0; inputs.len()];
        for m in 0..frames {
            let pos = m as f64 * ratio;
            let centre = pos.round() as i64;
            weights.clear();
            let mut norm = 0.0;
            for k in (centre - reach)..=(centre + reach) {
                let w = self.kernel(k as f64 - pos, half);
                norm += w;
                weights.push((k, w));
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &(k, w) in &weights {
                if k < 0 || k >= len {
                    continue;
                }
                for (a, input) in acc.iter_mut().zip(inputs) {
                    *a += w * input[k as usize].as_f64();
                }
            }
            for (out, a) in outputs.iter_mut().zip(&acc) {
                out.push(T::of(if norm != 0.0 { a / norm } else { 0.0 }));
            }
        }
        outputs
    }
}

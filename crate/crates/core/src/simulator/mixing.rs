use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pickup cross-coupling: `B1 = l1 A1 + (1 - l1) A2`, `B2 = (1 - l2) A1 + l2 A2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingConfig<T: Real> {
    pub lambda1: T,
    pub lambda2: T,
}

impl<T: Real> Default for MixingConfig<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> MixingConfig<T> {
    pub fn identity() -> Self {
        Self {
            lambda1: T::one(),
            lambda2: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("mixing.lambda1", self.lambda1), ("mixing.lambda2", self.lambda2)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn mix(&self, a1: T, a2: T) -> (T, T) {
        let one = T::one();
        (
            self.lambda1 * a1 + (one - self.lambda1) * a2,
            (one - self.lambda2) * a1 + self.lambda2 * a2,
        )
    }
}

pub fn mix_channels<T: Real>(a1: &[T], a2: &[T], mixing: &MixingConfig<T>) -> Result<(Vec<T>, Vec<T>)> {
    if a1.len() != a2.len() {
        return Err(Error::Shape(format!(
            "pickup traces differ in length: {} vs {}",
            a1.len(),
            a2.len()
        )));
    }
    Ok(a1.iter().zip(a2).map(|(x, y)| mixing.mix(*x, *y)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(l1: f64, l2: f64) -> MixingConfig<f64> {
        MixingConfig {
            lambda1: l1,
            lambda2: l2,
        }
    }

    #[test]
    fn mixing_examples() {
        let a1 = [1.0, -2.0, 3.0];
        let a2 = [0.5, 4.0, -1.0];
        let (b1, b2) = mix_channels(&a1, &a2, &m(1.0, 1.0)).unwrap();
        assert_eq!((b1.as_slice(), b2.as_slice()), (&a1[..], &a2[..]));
        let (b1, b2) = mix_channels(&a1, &a2, &m(0.5, 0.5)).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(b1, vec![0.75, 1.0, 1.0]);
        let (b1, b2) = mix_channels(&a1, &a2, &m(1.0, 0.0)).unwrap();
        assert_eq!(b1, a1.to_vec());
        assert_eq!(b2, a1.to_vec());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            mix_channels(&[1.0], &[1.0, 2.0], &m(1.0, 1.0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn lambda_range() {
        assert!(m(1.1, 0.5).validate().is_err());
        assert!(m(0.0, 1.0).validate().is_ok());
    }

    proptest! {
        #[test]
        fn mixing_is_linear(
            l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0,
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            xs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..32),
        ) {
            let mix = m(l1, l2);
            let x1: Vec<f64> = xs.iter().map(|t| t.0).collect();
            let x2: Vec<f64> = xs.iter().map(|t| t.1).collect();
            let y1: Vec<f64> = xs.iter().map(|t| t.2).collect();
            let y2: Vec<f64> = xs.iter().map(|t| t.3).collect();
            let z1: Vec<f64> = x1.iter().zip(&y1).map(|(p, q)| a * p + b * q).collect();
            let z2: Vec<f64> = x2.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect();
            let (zx, zy) = mix_channels(&z1, &z2, &mix).unwrap();
            let (xb1, xb2) = mix_channels(&x1, &x2, &mix).unwrap();
            let (yb1, yb2) = mix_channels(&y1, &y2, &mix).unwrap();
            for i in 0..xs.len() {
                prop_assert!((zx[i] - (a * xb1[i] + b * yb1[i])).abs() < 1e-12);
                prop_assert!((zy[i] - (a * xb2[i] + b * yb2[i])).abs() < 1e-12);
            }
        }
    }
}

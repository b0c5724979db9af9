//! Closed-form relations for an ideal string split by a clamping contact.
//!
//! Nothing here steps time. These functions label simulations, seed the
//! feature extractor with a baseline fundamental, and serve as oracles for
//! the simulator's steady-state spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical constants of the string and its force couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StringParams<T: Real> {
    /// Total vibrating length between the fixed supports, m.
    pub total_length: T,
    /// Mass per unit length, kg/m.
    pub linear_density: T,
    /// Tension with no contact force, N.
    pub baseline_tension: T,
    /// Tension added per newton of contact force.
    pub tension_coupling: T,
    /// Damping coefficient of each segment with no contact force.
    pub baseline_damping: [T; 2],
    /// Damping added per newton of contact force, per segment.
    pub damping_coupling: [T; 2],
    /// Safety factor on the explicit time-step bound, in (0, 1).
    pub cfl_factor: T,
}

impl<T: Real> Default for StringParams<T> {
    fn default() -> Self {
        Self::reference()
    }
}

impl<T: Real> StringParams<T> {
    /// The simulation parameter set used for the convergence example
    /// (0.65 m string, 65 N, 0.65 g/m, damping 0.02, no damping coupling).
    pub fn reference() -> Self {
        Self {
            total_length: T::of(0.65),
            linear_density: T::of(6.5e-4),
            baseline_tension: T::of(65.0),
            tension_coupling: T::of(6.0),
            baseline_damping: [T::of(0.02); 2],
            damping_coupling: [T::zero(); 2],
            cfl_factor: T::of(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("string.total_length", self.total_length),
            ("string.linear_density", self.linear_density),
            ("string.baseline_tension", self.baseline_tension),
        ];
        for (key, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.tension_coupling >= T::zero()) {
            return Err(Error::config(
                "string.tension_coupling",
                format!("must be >= 0, got {}", self.tension_coupling),
            ));
        }
        for k in 0..2 {
            if !(self.baseline_damping[k] >= T::zero()) {
                return Err(Error::config(
                    format!("string.baseline_damping[{k}]"),
                    format!("must be >= 0, got {}", self.baseline_damping[k]),
                ));
            }
            if !(self.damping_coupling[k] >= T::zero()) {
                return Err(Error::config(
                    format!("string.damping_coupling[{k}]"),
                    format!("must be >= 0, got {}", self.damping_coupling[k]),
                ));
            }
        }
        check_cfl_factor(self.cfl_factor).map_err(|_| {
            Error::config(
                "string.cfl_factor",
                format!("must lie in (0, 1), got {}", self.cfl_factor),
            )
        })
    }

    /// Fundamental of the unclamped string at baseline tension.
    pub fn open_fundamental(&self) -> Result<T> {
        harmonic_frequency(self.total_length, self.baseline_tension, self.linear_density, 1)
    }
}

/// Which side of the clamp a segment lies on. Segment 1 spans `[0, x]`,
/// segment 2 spans `[x, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }

    pub fn from_number(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Side::First),
            2 => Ok(Side::Second),
            _ => Err(Error::domain("side", k as f64, "side must be 1 or 2")),
        }
    }
}

/// Ground-truth contact state attached to a simulation or a dataset record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactCondition<T: Real> {
    pub in_contact: bool,
    /// Contact location along the string, m. Ignored when not in contact.
    pub location: T,
    /// Normal force, N.
    pub force: T,
    #[serde(default)]
    pub slipping: bool,
    /// Tangential slip speed, m/s.
    #[serde(default = "num_traits::Zero::zero")]
    pub slip_speed: T,
}

impl<T: Real> ContactCondition<T> {
    pub fn none() -> Self {
        Self {
            in_contact: false,
            location: T::zero(),
            force: T::zero(),
            slipping: false,
            slip_speed: T::zero(),
        }
    }

    pub fn pressed(location: T, force: T) -> Self {
        Self {
            in_contact: true,
            location,
            force,
            slipping: false,
            slip_speed: T::zero(),
        }
    }

    pub fn sliding(location: T, force: T, slip_speed: T) -> Self {
        Self {
            in_contact: true,
            location,
            force,
            slipping: true,
            slip_speed,
        }
    }

    pub fn validate(&self, total_length: T) -> Result<()> {
        if !self.in_contact {
            if self.force != T::zero() || self.slipping || self.slip_speed != T::zero() {
                return Err(Error::config(
                    "contact",
                    "without contact, force and slip_speed must be 0 and slipping false",
                ));
            }
            return Ok(());
        }
        if !(self.location > T::zero() && self.location < total_length) {
            return Err(Error::config(
                "contact.location",
                format!("must lie in (0, {total_length}), got {}", self.location),
            ));
        }
        if !(self.force >= T::zero()) || !self.force.is_finite() {
            return Err(Error::config(
                "contact.force",
                format!("must be finite and >= 0, got {}", self.force),
            ));
        }
        if self.slipping && !(self.slip_speed > T::zero()) {
            return Err(Error::config(
                "contact.slip_speed",
                format!("must be > 0 while slipping, got {}", self.slip_speed),
            ));
        }
        if !self.slipping && self.slip_speed != T::zero() {
            return Err(Error::config(
                "contact.slip_speed",
                "must be 0 unless slipping",
            ));
        }
        Ok(())
    }
}

/// Lengths of the two segments on either side of a clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGeometry<T> {
    pub first: T,
    pub second: T,
}

impl<T: Real> SegmentGeometry<T> {
    pub fn length(&self, side: Side) -> T {
        match side {
            Side::First => self.first,
            Side::Second => self.second,
        }
    }
}

pub fn split_lengths<T: Real>(x: T, params: &StringParams<T>) -> Result<SegmentGeometry<T>> {
    if !(x > T::zero()) {
        return Err(Error::domain("x", x.as_f64(), "lower bound: x > 0"));
    }
    if !(x < params.total_length) {
        return Err(Error::domain(
            "x",
            x.as_f64(),
            format!("upper bound: x < L = {}", params.total_length),
        ));
    }
    Ok(SegmentGeometry {
        first: x,
        second: params.total_length - x,
    })
}

/// `T(F) = T0 + k_T F`.
pub fn effective_tension<T: Real>(force: T, params: &StringParams<T>) -> Result<T> {
    check_force(force)?;
    Ok(params.baseline_tension + params.tension_coupling * force)
}

/// `d_k(F) = d0_k + kd_k F`.
pub fn segment_damping<T: Real>(force: T, side: Side, params: &StringParams<T>) -> Result<T> {
    check_force(force)?;
    let k = side.index();
    Ok(params.baseline_damping[k] + params.damping_coupling[k] * force)
}

pub fn wave_speed<T: Real>(tension: T, linear_density: T) -> Result<T> {
    if !(tension > T::zero()) {
        return Err(Error::domain("T", tension.as_f64(), "tension must be > 0"));
    }
    if !(linear_density > T::zero()) {
        return Err(Error::domain(
            "mu",
            linear_density.as_f64(),
            "linear density must be > 0",
        ));
    }
    Ok((tension / linear_density).sqrt())
}

/// Frequency of the `n`-th harmonic of an ideal string of length `length`.
pub fn harmonic_frequency<T: Real>(length: T, tension: T, linear_density: T, n: u32) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "harmonic index must be >= 1"));
    }
    if !(length > T::zero()) {
        return Err(Error::domain("L_eff", length.as_f64(), "length must be > 0"));
    }
    let v = wave_speed(tension, linear_density)?;
    Ok(T::of(f64::from(n)) * v / (T::of(2.0) * length))
}

/// The pair of segment fundamentals `(f1, f2)` for a contact at `x` with force `F`.
pub fn predicted_feature_pair<T: Real>(x: T, force: T, params: &StringParams<T>) -> Result<(T, T)> {
    let geometry = split_lengths(x, params)?;
    let tension = effective_tension(force, params)?;
    let v = wave_speed(tension, params.linear_density)?;
    let two = T::of(2.0);
    Ok((v / (two * geometry.first), v / (two * geometry.second)))
}

/// Largest admissible explicit time step `alpha * dxi / v`.
pub fn max_stable_timestep<T: Real>(spacing: T, speed: T, cfl_factor: T) -> Result<T> {
    check_cfl_factor(cfl_factor)?;
    if !(spacing > T::zero()) {
        return Err(Error::domain("dxi", spacing.as_f64(), "node spacing must be > 0"));
    }
    if !(speed > T::zero()) {
        return Err(Error::domain("v", speed.as_f64(), "wave speed must be > 0"));
    }
    Ok(cfl_factor * spacing / speed)
}

fn check_force<T: Real>(force: T) -> Result<()> {
    if force >= T::zero() && force.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("F", force.as_f64(), "force must be finite and >= 0"))
    }
}

fn check_cfl_factor<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::config(
            "string.cfl_factor",
            format!("must lie in (0, 1), got {alpha}"),
        ))
    }
}

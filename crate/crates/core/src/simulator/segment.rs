//! One clamped string segment integrated with the central-difference scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How the damping coefficient enters the per-node acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingModel {
    /// Coefficient per unit length: acceleration term `-(d / mu) * ydot`.
    /// Resolution-independent, matches the continuous damped wave equation.
    PerLength,
    /// Coefficient per node: acceleration term `-(d / (mu * dxi)) * ydot`.
    /// The effective decay rate grows with the node count.
    PerNode,
}

impl DampingModel {
    /// Velocity decay rate (1/s) for damping coefficient `d`.
    pub fn rate<T: Real>(self, d: T, linear_density: T, spacing: T) -> T {
        match self {
            DampingModel::PerLength => d / linear_density,
            DampingModel::PerNode => d / (linear_density * spacing),
        }
    }
}

/// Displacement field of one fixed-fixed segment at two consecutive time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentState<T> {
    length: T,
    spacing: T,
    dt: T,
    current: Vec<T>,
    previous: Vec<T>,
    scratch: Vec<T>,
    steps: usize,
}

/// Per-step constants derived from tension, damping, and the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients<T> {
    courant_sq: T,
    damping_half: T,
    force_scale: T,
}

impl<T: Real> StepCoefficients<T> {
    pub fn new(
        state: &SegmentState<T>,
        tension: T,
        linear_density: T,
        damping: T,
        model: DampingModel,
    ) -> Self {
        let dt = state.dt;
        let v_sq = tension / linear_density;
        let gamma = model.rate(damping, linear_density, state.spacing);
        Self {
            courant_sq: v_sq * dt * dt / (state.spacing * state.spacing),
            damping_half: T::of(0.5) * gamma * dt,
            force_scale: dt * dt / (linear_density * state.spacing),
        }
    }
}

impl<T: Real> SegmentState<T> {
    /// A segment at rest. `nodes` includes both pinned end points.
    pub fn at_rest(length: T, nodes: usize, dt: T) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::config("simulation.nodes", format!("need >= 3 nodes, got {nodes}")));
        }
        if !(length > T::zero()) {
            return Err(Error::domain("L_k", length.as_f64(), "segment length must be > 0"));
        }
        if !(dt > T::zero()) {
            return Err(Error::config("simulation.timestep", "must be > 0"));
        }
        Ok(Self {
            length,
            spacing: length / T::of((nodes - 1) as f64),
            dt,
            current: vec![T::zero(); nodes],
            previous: vec![T::zero(); nodes],
            scratch: vec![T::zero(); nodes],
            steps: 0,
        })
    }

    /// Sets the displacement at rest (zero velocity) from a shape function of
    /// the local coordinate. End points stay pinned.
    pub fn set_shape(&mut self, shape: impl Fn(T) -> T) {
        let n = self.current.len();
        for i in 1..n - 1 {
            let xi = self.position(i);
            self.current[i] = shape(xi);
        }
        self.current[0] = T::zero();
        self.current[n - 1] = T::zero();
        self.previous.copy_from_slice(&self.current);
    }

    /// Triangular pluck of peak `amplitude` at local coordinate `apex`.
    pub fn pluck(&mut self, apex: T, amplitude: T) {
        let length = self.length;
        self.set_shape(|xi| {
            if xi <= apex {
                amplitude * xi / apex
            } else {
                amplitude * (length - xi) / (length - apex)
            }
        });
    }

    pub fn node_count(&self) -> usize {
        self.current.len()
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn timestep(&self) -> T {
        self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn position(&self, i: usize) -> T {
        T::of(i as f64) * self.spacing
    }

    pub fn displacements(&self) -> &[T] {
        &self.current
    }

    pub fn previous_displacements(&self) -> &[T] {
        &self.previous
    }

    /// Velocity at node `i` over the last step, `(y^n - y^{n-1}) / dt`.
    #[inline]
    pub fn velocity(&self, i: usize) -> T {
        (self.current[i] - self.previous[i]) / self.dt
    }

    pub fn velocities(&self) -> Vec<T> {
        (0..self.node_count()).map(|i| self.velocity(i)).collect()
    }

    /// Index of the node nearest `fraction * L_k`.
    pub fn nearest_node(&self, fraction: T) -> usize {
        let last = self.node_count() - 1;
        let idx = (fraction * T::of(last as f64)).round().as_f64();
        (idx.max(0.0) as usize).min(last)
    }

    /// Advances one step of
    /// `ydot_dot = v^2 lap(y) + f_i / (mu dxi) - gamma * ydot`,
    /// with the damping velocity taken centred in time. `forces` holds the
    /// external force on each node in newtons.
    pub fn step(&mut self, coeffs: &StepCoefficients<T>, forces: &[T]) -> Result<()> {
        let n = self.current.len();
        debug_assert_eq!(forces.len(), n);
        let two = T::of(2.0);
        let inv = T::one() / (T::one() + coeffs.damping_half);
        let keep = T::one() - coeffs.damping_half;
        let y = &self.current;
        let yp = &self.previous;
        let out = &mut self.scratch;
        let mut check = T::zero();
        for i in 1..n - 1 {
            let lap = y[i + 1] - two * y[i] + y[i - 1];
            let next = (two * y[i] - keep * yp[i]
                + coeffs.courant_sq * lap
                + coeffs.force_scale * forces[i])
                * inv;
            out[i] = next;
            check = check + next;
        }
        out[0] = T::zero();
        out[n - 1] = T::zero();
        self.steps += 1;
        if !check.is_finite() {
            return Err(Error::Integration {
                segment: 0,
                step: self.steps,
                time: self.steps as f64 * self.dt.as_f64(),
            });
        }
        std::mem::swap(&mut self.previous, &mut self.current);
        std::mem::swap(&mut self.current, &mut self.scratch);
        Ok(())
    }
}

/// Discrete energy `sum 1/2 mu dxi ydot^2 + sum 1/2 T dxi (dy/dxi)^2`.
///
/// The potential term pairs the slopes of the two stored time levels, which
/// makes it the invariant of the undamped central-difference update; for a
/// state at rest it reduces to the plain squared-slope sum.
pub fn discrete_energy<T: Real>(state: &SegmentState<T>, tension: T, linear_density: T) -> T {
    let dxi = state.spacing;
    let half = T::of(0.5);
    let y = &state.current;
    let yp = &state.previous;
    let mut kinetic = T::zero();
    for i in 0..y.len() {
        let v = state.velocity(i);
        kinetic = kinetic + v * v;
    }
    let mut potential = T::zero();
    for i in 0..y.len() - 1 {
        let a = (y[i + 1] - y[i]) / dxi;
        let b = (yp[i + 1] - yp[i]) / dxi;
        potential = potential + a * b;
    }
    half * linear_density * dxi * kinetic + half * tension * dxi * potential
}

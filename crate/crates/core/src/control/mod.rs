//! The planar control system `x' = y^2 + x^2 - 1`, `y' = 2xy + u gamma y^2`
//! obtained from `x = alpha'`, `y = sqrt(h)`, its trajectories and the
//! optimal syntheses built from them.

pub mod profile;
pub mod random;
pub mod synthesis;
pub mod trajectory;

use std::fmt;

use crate::bellman::free::{optimal_u_free, optimal_u_free_partials};
use crate::centroaffine::{classify_with_tol, CubicBound, Side, StateClass, STATE_TOL};
use crate::error::{ensure_finite, Error, Result};

pub use profile::{profile_from_trajectory, TrajectoryProfile};
pub use random::{random_admissible_profile, random_free_profile};
pub use synthesis::{
    extend_to_corners, synthesize_max_fixed_start, synthesize_max_free, synthesize_min_fixed_start,
    synthesize_free, synthesize_min_free, MaxPattern, Synthesizer,
};
pub use trajectory::{Integrator, Sample, Segment, Trajectory, TrajectoryBuilder};

/// A point `(x, y) = (alpha', sqrt(h))` of the state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlState {
    pub x: f64,
    pub y: f64,
}

impl ControlState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn classify(&self, bound: &CubicBound) -> StateClass {
        classify_with_tol(self.x, self.y, bound.mu(), crate::centroaffine::BOUNDARY_TOL)
    }

    pub fn is_feasible(&self, bound: &CubicBound) -> bool {
        self.y > 0.0 && classify_with_tol(self.x, self.y, bound.mu(), STATE_TOL) != StateClass::Outside
    }
}

pub(crate) fn field(x: f64, y: f64, u: f64, gamma: f64) -> (f64, f64) {
    (y * y + x * x - 1.0, 2.0 * x * y + u * gamma * y * y)
}

/// Vector field of the system for an admissible control value.
pub fn dynamics(s: ControlState, u: f64, bound: &CubicBound) -> Result<(f64, f64)> {
    ensure_finite("u", u)?;
    if u.abs() > 1.0 {
        return Err(Error::Domain(format!("control must lie in [-1, 1], got {u}")));
    }
    if !(s.y > 0.0) {
        return Err(Error::Domain(format!("y must be positive, got {}", s.y)));
    }
    Ok(field(s.x, s.y, u, bound.gamma()))
}

/// Conserved quantity of the constant-control flow with control `u`.
pub fn first_integral(s: ControlState, u: f64, bound: &CubicBound) -> Result<f64> {
    ensure_finite("u", u)?;
    let g = u * bound.gamma();
    let mu_u = 0.5 * g + (1.0 + 0.25 * g * g).sqrt();
    let den = mu_u * (s.y * s.y - s.x * s.x + 1.0) - (mu_u * mu_u - 1.0) * s.x * s.y;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Domain(format!("first integral is singular at ({}, {})", s.x, s.y)));
    }
    Ok((mu_u * mu_u + 1.0) * s.y / den)
}

/// Which problem a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    /// The state `(x, y)` evolves under the bounded dynamics and must stay in the feasible set.
    Bounded(CubicBound),
    /// Only `x` is a state; the control is `x'` itself and `y = sqrt(u - x^2 + 1)`.
    Free,
}

/// Smooth step from 0 to 1 on `[0, 1]`: the normalized integral of `s^2 (1 - s)^2`.
pub fn smooth_step(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (6.0 * s - 15.0))
}

fn smooth_step_rate(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    let r = 2.0 * s - 1.0;
    let q = 1.0 - r * r;
    15.0 / 8.0 * q * q
}

/// A control law on one arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlLaw {
    Constant(f64),
    /// Move along a side with its sliding control, re-projecting after every step.
    Slide(Side),
    /// `from + (to - from) * smooth_step((t - start) / width)`.
    Blend { from: f64, to: f64, start: f64, width: f64 },
    /// Free-problem feedback `x' = scale * u*(t, x / scale)`; `scale < 1`
    /// keeps the path strictly inside `|x| < 1`.
    FreeFeedback { scale: f64 },
    /// Free-problem law `x' = (1 - x^2)(v(t) - 1)` with `v` linear from
    /// `v0` at `t0` to `v1` at `t1`; then `h = v (1 - x^2)`.
    FreeRamp { v0: f64, v1: f64, t0: f64, t1: f64 },
}

impl ControlLaw {
    pub fn control(&self, t: f64, x: f64) -> f64 {
        match *self {
            ControlLaw::Constant(u) => u,
            ControlLaw::Slide(side) => side.sliding_control(),
            ControlLaw::Blend { from, to, start, width } => from + (to - from) * smooth_step((t - start) / width),
            ControlLaw::FreeFeedback { scale } => {
                scale * optimal_u_free(t.min(-f64::MIN_POSITIVE), x / scale).unwrap_or(f64::NAN)
            }
            ControlLaw::FreeRamp { .. } => (1.0 - x * x) * (self.ramp(t) - 1.0),
        }
    }

    /// Total time derivative of the control along the path, `x'` given.
    pub fn control_rate(&self, t: f64, x: f64, xdot: f64) -> f64 {
        match *self {
            ControlLaw::Constant(_) | ControlLaw::Slide(_) => 0.0,
            ControlLaw::Blend { from, to, start, width } => (to - from) * smooth_step_rate((t - start) / width) / width,
            ControlLaw::FreeFeedback { scale } => {
                let (ut, ux) = optimal_u_free_partials(t, x / scale);
                scale * ut + ux * xdot
            }
            ControlLaw::FreeRamp { v0, v1, t0, t1 } => {
                let vdot = (v1 - v0) / (t1 - t0);
                (1.0 - x * x) * vdot - 2.0 * x * xdot * (self.ramp(t) - 1.0)
            }
        }
    }

    fn ramp(&self, t: f64) -> f64 {
        match *self {
            ControlLaw::FreeRamp { v0, v1, t0, t1 } => v0 + (v1 - v0) * (t - t0) / (t1 - t0),
            _ => f64::NAN,
        }
    }

    /// Largest step the integrator should take at time `t`.
    pub fn max_step(&self, t: f64, step: f64) -> f64 {
        match *self {
            ControlLaw::Blend { width, .. } => step.min(width / 200.0),
            ControlLaw::FreeFeedback { .. } => step.min(0.25 * t.abs()),
            _ => step,
        }
    }

    /// Whether the step size depends on the time (and so must be chosen adaptively).
    pub(crate) fn adaptive(&self) -> bool {
        matches!(self, ControlLaw::FreeFeedback { .. })
    }

    pub fn tag(&self) -> String {
        match *self {
            ControlLaw::Constant(u) if u == 1.0 => "const(+1)".into(),
            ControlLaw::Constant(u) if u == -1.0 => "const(-1)".into(),
            ControlLaw::Constant(u) if u == 0.0 => "const(0)".into(),
            ControlLaw::Constant(u) => format!("const({u})"),
            ControlLaw::Slide(side) => format!("slide({side})"),
            ControlLaw::Blend { .. } => "blend".into(),
            ControlLaw::FreeFeedback { .. } => "free".into(),
            ControlLaw::FreeRamp { .. } => "free-ramp".into(),
        }
    }
}

impl fmt::Display for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

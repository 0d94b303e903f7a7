//! Value functions of the three length-extremization problems and the
//! harness that certifies them numerically.

pub mod bounded_max;
pub mod bounded_min;
pub mod free;
pub mod verify;

use std::fmt;

use crate::centroaffine::{feasibility_margin, CubicBound, STATE_TOL};
use crate::error::{ensure_finite, Error, Result};

pub use bounded_max::{bellman_max, maximal_b, optimal_control_max, thresholds_max};
pub use bounded_min::{bellman_min, minimal_b, optimal_control_min, thresholds_min};
pub use free::{bellman_free, euler_lagrange_family, family_constant, optimal_u_free};

/// A threshold time that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// As an `f64`, mapping `PosInf` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

/// The eight linear forms the value functions are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxQuantities {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl AuxQuantities {
    pub fn new(x: f64, y: f64, mu: f64) -> Self {
        Self {
            a_plus: mu * y + (1.0 - x),
            a_minus: mu * y - (1.0 - x),
            b_plus: mu * y + (1.0 + x),
            b_minus: mu * y - (1.0 + x),
            c_plus: mu * (1.0 - x) + y,
            c_minus: mu * (1.0 - x) - y,
            d_plus: mu * (1.0 + x) + y,
            d_minus: mu * (1.0 + x) - y,
        }
    }
}

/// Switching thresholds of the optimal syntheses at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionThresholds {
    /// Time for the `u = +1` flow to reach the upper-right side.
    pub t_plus1: ExtReal,
    pub t_hat: ExtReal,
    pub t_star: ExtReal,
    /// Time for the `u = -1` flow to reach the lower-left side.
    pub t_minus1: ExtReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    I,
    II,
    III,
    IV,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanEval {
    pub value: f64,
    pub region: Region,
    /// Square-root auxiliary, present only in regions III and IV.
    pub w: Option<f64>,
}

/// An extremizer of the value function over the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Offset used to step off a side when a formula is singular on it.
pub const INWARD_OFFSET: f64 = 1e-10;

/// `W` radicands above `-RADICAND_TOL * (1 + K^2)` are clamped to zero.
pub const RADICAND_TOL: f64 = 1e-9;

/// `(w, z) = (y/(1-x), y/(1+x))`, the coordinates in which the feasible set
/// is the square `[1/mu, mu]^2`.
pub fn to_wz(x: f64, y: f64) -> (f64, f64) {
    (y / (1.0 - x), y / (1.0 + x))
}

pub fn from_wz(w: f64, z: f64) -> (f64, f64) {
    ((w - z) / (w + z), 2.0 * w * z / (w + z))
}

pub(crate) fn check_state(t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<()> {
    ensure_finite("t", t)?;
    ensure_finite("x", x)?;
    ensure_finite("y", y)?;
    if t > 0.0 {
        return Err(Error::Domain(format!("time must be nonpositive, got {t}")));
    }
    if bound.is_degenerate() {
        return Err(Error::Domain("bounded problems need mu > 1".into()));
    }
    if !(y > 0.0) || feasibility_margin(x, y, bound.mu()) < -STATE_TOL {
        return Err(Error::Infeasible { x, y });
    }
    Ok(())
}

/// Move a state at most [`INWARD_OFFSET`] into the interior, in `(w, z)`.
pub(crate) fn nudge_inward(x: f64, y: f64, mu: f64) -> (f64, f64) {
    let (w, z) = to_wz(x, y);
    let lo = 1.0 / mu + INWARD_OFFSET;
    let hi = mu - INWARD_OFFSET;
    from_wz(w.clamp(lo, hi), z.clamp(lo, hi))
}

/// Evaluate `f`, retrying slightly inside the set when the closed form is
/// singular on the boundary.
pub(crate) fn eval_with_nudge<F>(x: f64, y: f64, mu: f64, f: F) -> Result<BellmanEval>
where
    F: Fn(f64, f64) -> Result<BellmanEval>,
{
    match f(x, y) {
        Ok(e) if e.value.is_finite() => Ok(e),
        first => {
            let (xn, yn) = nudge_inward(x, y, mu);
            match f(xn, yn) {
                Ok(e) if e.value.is_finite() => Ok(e),
                Ok(e) => Err(Error::Domain(format!(
                    "value function is not finite at ({x}, {y}) in region {}",
                    e.region
                ))),
                Err(e) => Err(first.err().unwrap_or(e)),
            }
        }
    }
}

pub(crate) fn sqrt_radicand(t: f64, x: f64, y: f64, k: f64, s: f64) -> Result<f64> {
    let r = k * k - s * s;
    if r >= 0.0 {
        Ok(r.sqrt())
    } else if r >= -RADICAND_TOL * (1.0 + k * k) {
        Ok(0.0)
    } else {
        Err(Error::Radicand { t, x, y, value: r })
    }
}

//! Value function of the unconstrained problem: maximize `∫ sqrt(u - x^2 + 1)`
//! subject to `x' = u` with free start and end.

use crate::error::{ensure_finite, Error, Result};

/// Value of the remaining problem at time `t <= 0` from slope `x`.
pub fn bellman_free(t: f64, x: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("x", x)?;
    if t > 0.0 {
        return Err(Error::Domain(format!("time must be nonpositive, got {t}")));
    }
    if x.abs() > 1.0 {
        return Err(Error::Domain(format!("slope must lie in [-1, 1], got {x}")));
    }
    let q = -(2.0 * t).exp_m1(); // 1 - e^{2t}
    let e = 1.0 - q;
    let rad = q * (1.0 - x) * (1.0 + e - x * q);
    if rad < -1e-14 {
        return Err(Error::Radicand { t, x, y: f64::NAN, value: rad });
    }
    Ok(0.5 * (rad.max(0.0).sqrt() - x * q + 1.0).ln() - t)
}

/// The control attaining the maximum in the dynamic-programming inequality.
pub fn optimal_u_free(t: f64, x: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("x", x)?;
    if t >= 0.0 {
        return Err(Error::Domain(format!("optimal control is singular at t = {t} >= 0")));
    }
    let q = -(2.0 * t).exp_m1();
    let e = 1.0 - q;
    Ok(2.0 * (1.0 - x) * (e - x * q) / q)
}

/// Partial derivatives `(d/dt, d/dx)` of [`optimal_u_free`].
pub fn optimal_u_free_partials(t: f64, x: f64) -> (f64, f64) {
    let q = -(2.0 * t).exp_m1();
    let e = 1.0 - q;
    let du_dt = 4.0 * (1.0 - x) * e / (q * q);
    let du_dx = 2.0 * (-e + (2.0 * x - 1.0) * q) / q;
    (du_dt, du_dx)
}

/// Closed-form extremals `x(t; c)` of the unconstrained problem.
pub fn euler_lagrange_family(t: f64, c: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("c", c)?;
    if !(c > -1.0 && c < 1.0) {
        return Err(Error::Domain(format!("family parameter must lie in (-1, 1), got {c}")));
    }
    let e2 = (2.0 * t).exp();
    let e4 = e2 * e2;
    let den = (e2 + (e2 - 2.0) * c) * (e2 * c + e2 - 2.0);
    if den == 0.0 {
        return Err(Error::Domain(format!("extremal has a pole at t = {t} for c = {c}")));
    }
    Ok(-(e4 * c * c + 2.0 * (e4 - 2.0) * c + e4) / den)
}

/// Member of the family running from `x(-d) = -1` to `x(0) = 1`, i.e. the
/// root in `(0, 1)` of `4c / (1 + c)^2 = e^{-2d}`.
pub fn family_constant(d: f64) -> Result<f64> {
    ensure_finite("d", d)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    let k = (-2.0 * d).exp();
    let s = (-(-2.0 * d).exp_m1()).sqrt(); // sqrt(1 - k)
    // (2 - k - 2 sqrt(1-k)) / k rewritten without cancellation.
    Ok(k / ((1.0 + s) * (1.0 + s)))
}

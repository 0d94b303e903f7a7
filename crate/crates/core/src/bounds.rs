//! Closed-form length bounds in terms of the Hilbert distance `d`.
//!
//! With `k = 2 mu / (mu^2 + 1)` every bounded-case formula is a multiple of
//! `k` plus logs; the `mu -> 1` limits all collapse to `d` and are routed
//! there directly to avoid `0/0`.

use std::f64::consts::LN_2;

use crate::centroaffine::CubicBound;
use crate::error::{ensure_finite, Error, Result};

fn check_d(d: f64) -> Result<f64> {
    ensure_finite("d", d)?;
    if d < 0.0 {
        return Err(Error::Domain(format!("distance must be nonnegative, got {d}")));
    }
    Ok(d)
}

fn k_factor(mu: f64) -> f64 {
    2.0 * mu / (mu * mu + 1.0)
}

/// Length bound for curves with no cubic-form constraint.
pub fn thm1_upper(d: f64) -> Result<f64> {
    let d = check_d(d)?;
    // log(e^d + sqrt(e^{2d} - 1)) = d + log(1 + sqrt(1 - e^{-2d}))
    Ok(d + (-(-2.0 * d).exp_m1()).sqrt().ln_1p())
}

/// Distance at which the upper bound switches from its boundary branch to
/// the interior branch.
pub fn upper_branch_point(bound: &CubicBound) -> f64 {
    let m2 = bound.mu() * bound.mu();
    ((m2 + 1.0) / (m2 - 1.0)).ln()
}

/// Upper length bound under the cubic-form constraint.
pub fn thm2_upper(d: f64, bound: &CubicBound) -> Result<f64> {
    let d = check_d(d)?;
    if bound.is_degenerate() {
        return Ok(d);
    }
    if d <= upper_branch_point(bound) {
        Ok(thm2_boundary_branch(d, bound))
    } else {
        Ok(thm2_interior_branch(d, bound))
    }
}

pub(crate) fn thm2_boundary_branch(d: f64, bound: &CubicBound) -> f64 {
    let mu = bound.mu();
    k_factor(mu) * (0.5 * (mu * mu + 1.0) * d.exp_m1()).ln_1p()
}

pub(crate) fn thm2_interior_branch(d: f64, bound: &CubicBound) -> f64 {
    let mu = bound.mu();
    let m2 = mu * mu;
    // 2 log(sqrt(E+1) + sqrt(E-1)) with E = e^d, kept finite for large d.
    let q = (-d).exp();
    let two_log_sum = d + 2.0 * ((1.0 + q).sqrt() + (-(-d).exp_m1()).sqrt()).ln();
    ((mu - 1.0) / (mu + 1.0)).ln() + two_log_sum - LN_2 + k_factor(mu) * (2.0 * m2 / (m2 - 1.0)).ln()
}

/// Offset of the asymptote of [`thm2_upper`]: `log 2 - log((mu+1)/(mu-1)) + k log(2 mu^2/(mu^2-1))`.
pub fn thm2_asymptotic_gap(bound: &CubicBound) -> f64 {
    if bound.is_degenerate() {
        return 0.0;
    }
    let mu = bound.mu();
    let m2 = mu * mu;
    LN_2 - ((mu + 1.0) / (mu - 1.0)).ln() + k_factor(mu) * (2.0 * m2 / (m2 - 1.0)).ln()
}

/// Linear relaxation of [`thm2_upper`], valid for all `d`.
pub fn thm2_relaxed(d: f64, bound: &CubicBound) -> Result<f64> {
    let d = check_d(d)?;
    Ok(d + thm2_asymptotic_gap(bound))
}

/// Lower length bound under the cubic-form constraint.
pub fn thm3_lower(d: f64, bound: &CubicBound) -> Result<f64> {
    let d = check_d(d)?;
    if bound.is_degenerate() {
        return Ok(d);
    }
    let mu = bound.mu();
    let m2 = mu * mu;
    Ok(k_factor(mu) * (d + (((m2 + 1.0) + (m2 - 1.0) * (-d).exp()) / (2.0 * m2)).ln()))
}

/// Linear relaxation of [`thm3_lower`].
pub fn thm3_relaxed(d: f64, bound: &CubicBound) -> Result<f64> {
    let d = check_d(d)?;
    if bound.is_degenerate() {
        return Ok(d);
    }
    let mu = bound.mu();
    Ok(k_factor(mu) * (d - (2.0 * mu * mu / (mu * mu + 1.0)).ln()))
}

/// Bounds `(d / mu, d mu)` on the geodesic distance.
pub fn thm4_geodesic_bounds(d: f64, bound: &CubicBound) -> Result<(f64, f64)> {
    let d = check_d(d)?;
    Ok((d / bound.mu(), d * bound.mu()))
}

/// Excess of the upper bound over the distance itself.
pub fn delta(t: f64, bound: &CubicBound) -> Result<f64> {
    Ok(thm2_upper(t, bound)? - t)
}

/// One row of a bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCurveSample {
    pub d_h: f64,
    pub e: f64,
    pub thm1_upper: f64,
    pub thm2_upper: f64,
    pub thm2_relaxed: f64,
    pub thm3_lower: f64,
    pub thm3_relaxed: f64,
    pub gamma: f64,
    pub mu: f64,
}

pub const BOUNDS_HEADER: [&str; 9] =
    ["dH", "E", "thm1_upper", "thm2_upper", "thm2_relaxed", "thm3_lower", "thm3_relaxed", "gamma", "mu"];

impl BoundCurveSample {
    pub fn evaluate(d: f64, bound: &CubicBound) -> Result<Self> {
        Ok(Self {
            d_h: d,
            e: check_d(d)?.exp(),
            thm1_upper: thm1_upper(d)?,
            thm2_upper: thm2_upper(d, bound)?,
            thm2_relaxed: thm2_relaxed(d, bound)?,
            thm3_lower: thm3_lower(d, bound)?,
            thm3_relaxed: thm3_relaxed(d, bound)?,
            gamma: bound.gamma(),
            mu: bound.mu(),
        })
    }

    pub fn record(&self) -> [f64; 9] {
        [
            self.d_h,
            self.e,
            self.thm1_upper,
            self.thm2_upper,
            self.thm2_relaxed,
            self.thm3_lower,
            self.thm3_relaxed,
            self.gamma,
            self.mu,
        ]
    }
}

/// All bounds for the Blaschke metric of an `n`-dimensional domain.
pub fn blaschke_corollary_bounds(d: f64, n: u32) -> Result<BoundCurveSample> {
    BoundCurveSample::evaluate(d, &CubicBound::blaschke(n)?)
}

/// Evenly spaced table over `[0, d_max]` with `samples` rows.
pub fn bound_table(d_max: f64, samples: usize, bound: &CubicBound) -> Result<Vec<BoundCurveSample>> {
    check_d(d_max)?;
    if samples < 2 {
        return Err(Error::Domain("a bound table needs at least two samples".into()));
    }
    (0..samples)
        .map(|i| BoundCurveSample::evaluate(d_max * i as f64 / (samples - 1) as f64, bound))
        .collect()
}

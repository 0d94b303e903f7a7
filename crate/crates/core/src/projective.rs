//! Cross-ratio and Hilbert distance on an open segment of the projective line.

use crate::error::{ensure_finite, Error, Result};

/// An open segment `(left, right)` in a fixed affine chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentChart {
    left: f64,
    right: f64,
}

impl SegmentChart {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        ensure_finite("left", left)?;
        ensure_finite("right", right)?;
        if left >= right {
            return Err(Error::Domain(format!("segment needs left < right, got ({left}, {right})")));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn contains(&self, p: f64) -> bool {
        self.left < p && p < self.right
    }
}

/// `|ya|·|xb| / (|yb|·|xa|)` for four distinct collinear coordinates.
pub fn cross_ratio(a: f64, b: f64, y: f64, x: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("b", b), ("y", y), ("x", x)] {
        ensure_finite(name, v)?;
    }
    let den = (y - b).abs() * (x - a).abs();
    if den == 0.0 {
        return Err(Error::Domain("coincident points in cross-ratio".into()));
    }
    Ok((y - a).abs() * (x - b).abs() / den)
}

/// Hilbert distance between two points of the segment.
///
/// Evaluated as half a sum of log-differences, so points close to the
/// boundary do not overflow the ratio. The two points are sorted first, which
/// makes the result bit-for-bit symmetric.
pub fn hilbert_distance(chart: &SegmentChart, a: f64, b: f64) -> Result<f64> {
    ensure_finite("a", a)?;
    ensure_finite("b", b)?;
    if !chart.contains(a) || !chart.contains(b) {
        return Err(Error::Domain(format!(
            "points ({a}, {b}) must lie strictly inside ({}, {})",
            chart.left, chart.right
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let (x, y) = (chart.left, chart.right);
    let d = 0.5 * (((y - p).ln() - (y - q).ln()) + ((q - x).ln() - (p - x).ln()));
    Ok(d.max(0.0))
}

/// Distance in the parameterization where the segment is `tanh` of the real line.
pub fn t_param_distance(t_i: f64, t_f: f64) -> Result<f64> {
    ensure_finite("t_i", t_i)?;
    ensure_finite("t_f", t_f)?;
    Ok((t_i - t_f).abs())
}

//! Quadrature helpers: adaptive Simpson for callables and composite Simpson
//! for sampled data on (possibly) irregular grids.

use crate::error::Result;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of a fallible integrand to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&mut f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Composite Simpson rule on an increasing, possibly irregular grid.
///
/// Intervals are paired; an odd trailing interval uses the three-point
/// correction so the rule stays fourth order.
pub fn simpson_samples(ts: &[f64], fs: &[f64]) -> f64 {
    debug_assert_eq!(ts.len(), fs.len());
    let n = ts.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (ts[1] - ts[0]) * (fs[0] + fs[1]);
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut sum = 0.0;
    let mut i = 0;
    while i < paired {
        let h0 = ts[i + 1] - ts[i];
        let h1 = ts[i + 2] - ts[i + 1];
        let hs = h0 + h1;
        sum += hs / 6.0
            * ((2.0 - h1 / h0) * fs[i] + hs * hs / (h0 * h1) * fs[i + 1] + (2.0 - h0 / h1) * fs[i + 2]);
        i += 2;
    }
    if intervals % 2 == 1 {
        let k = n - 1;
        let h0 = ts[k - 1] - ts[k - 2];
        let h1 = ts[k] - ts[k - 1];
        sum += fs[k] * (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1))
            + fs[k - 1] * (h1 * h1 + 3.0 * h1 * h0) / (6.0 * h0)
            - fs[k - 2] * h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    sum
}

//! Value function of the minimization problem with a cubic-form bound.

use super::{check_state, eval_with_nudge, AuxQuantities, BellmanEval, ExtReal, Extremum, Region};
use super::bounded_max::{thresholds_unchecked, ON_SIDE_TOL};
use crate::centroaffine::CubicBound;
use crate::error::{Error, Result};

/// Time for the `u = -1` flow from `(x, y)` to reach the lower-left side.
pub fn thresholds_min(x: f64, y: f64, bound: &CubicBound) -> Result<ExtReal> {
    check_state(0.0, x, y, bound)?;
    Ok(thresholds_unchecked(x, y, bound.mu()).t_minus1)
}

pub fn region_min(t: f64, t_minus1: ExtReal) -> Region {
    if -t <= t_minus1.to_f64() {
        Region::I
    } else {
        Region::II
    }
}

pub fn min_region_formula(region: Region, t: f64, x: f64, y: f64, mu: f64) -> Result<BellmanEval> {
    let q = AuxQuantities::new(x, y, mu);
    let m2 = mu * mu;
    let k = mu / (m2 + 1.0);
    let e = (-2.0 * t).exp();
    let value = match region {
        Region::I => k * (mu * (q.a_plus * e - q.b_minus) / (q.c_minus * e + q.d_plus)).ln(),
        Region::II => {
            let bracket = (m2 + 1.0) * q.c_minus * q.a_plus * e
                + m2 * m2 * y * (1.0 + x)
                + mu * (1.0 + m2) * (y * y - x * x + 1.0)
                - 6.0 * m2 * y
                + y * (1.0 - x);
            k * (q.a_plus / (8.0 * m2 * mu * y * q.c_minus) * bracket).ln()
        }
        other => return Err(Error::Domain(format!("the minimization problem has no region {other}"))),
    };
    Ok(BellmanEval { value, region, w: None })
}

/// Optimal value of the minimization problem from `(x, y)` with `-t` time left.
pub fn bellman_min(t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<BellmanEval> {
    check_state(t, x, y, bound)?;
    let mu = bound.mu();
    eval_with_nudge(x, y, mu, |x, y| {
        let tm = thresholds_unchecked(x, y, mu).t_minus1;
        min_region_formula(region_min(t, tm), t, x, y, mu)
    })
}

/// `-1` until the lower-left side is reached, `+1` on it.
pub fn optimal_control_min(t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<f64> {
    check_state(t, x, y, bound)?;
    let a_minus = bound.mu() * y - (1.0 - x);
    Ok(if a_minus > ON_SIDE_TOL { -1.0 } else { 1.0 })
}

/// Closed-form minimizer of `B(-horizon, ., .)` over the feasible set.
pub fn minimal_b(horizon: f64, bound: &CubicBound) -> Result<Extremum> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if bound.is_degenerate() {
        return Err(Error::Domain("bounded problems need mu > 1".into()));
    }
    let (x, y) = argmin_point(horizon, bound.mu());
    let value = bellman_min(-horizon, x, y, bound)?.value;
    Ok(Extremum { x, y, value })
}

pub(crate) fn argmin_point(horizon: f64, mu: f64) -> (f64, f64) {
    let m2 = mu * mu;
    let e = horizon.exp();
    let den = e * (m2 + 1.0) + m2 - 1.0;
    (horizon.exp_m1() * (m2 - 1.0) / den, 2.0 * mu * e / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::bellman_max;
    use crate::bellman::from_wz;
    use crate::bounds::thm3_lower;
    use crate::centroaffine::mu_from_gamma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn terminal_value_and_seam() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in [0.25, 0.5, 1.0, 1.5] {
            let b = mu_from_gamma(g).unwrap();
            let mu = b.mu();
            let m2 = mu * mu;
            for _ in 0..300 {
                let span = mu - 1.0 / mu;
                let (x, y) = from_wz(1.0 / mu + span * rng.random_range(0.01..0.99), 1.0 / mu + span * rng.random_range(0.01..0.99));
                let e0 = bellman_min(0.0, x, y, &b).unwrap();
                assert!(e0.value.abs() < 1e-12 && e0.region == Region::I);
                let tm = thresholds_min(x, y, &b).unwrap().to_f64();
                let q = AuxQuantities::new(x, y, mu);
                let expect = mu / (m2 + 1.0) * ((m2 - 1.0) * q.a_plus / (2.0 * mu * q.c_minus)).ln();
                for r in [Region::I, Region::II] {
                    let v = min_region_formula(r, -tm, x, y, mu).unwrap().value;
                    assert!((v - expect).abs() < 1e-10 * (1.0 + expect.abs()));
                }
                let s = rng.random_range(0.0..5.0);
                let lo = bellman_min(-s, x, y, &b).unwrap().value;
                let hi = bellman_max(-s, x, y, &b).unwrap().value;
                assert!(lo <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn controls() {
        let b = mu_from_gamma(0.5).unwrap();
        let mu = b.mu();
        let x = -0.1;
        assert_eq!(optimal_control_min(-1.0, x, (1.0 - x) / mu, &b).unwrap(), 1.0);
        assert_eq!(optimal_control_min(-1.0, 0.0, 1.0, &b).unwrap(), -1.0);
        assert!(min_region_formula(Region::III, -1.0, 0.0, 1.0, mu).is_err());
    }

    #[test]
    fn minimizer_closed_form() {
        for g in [0.25, 0.5, 1.0, 1.5] {
            let b = mu_from_gamma(g).unwrap();
            let mu = b.mu();
            for i in 1..=80 {
                let horizon = 0.05 * i as f64;
                let m = minimal_b(horizon, &b).unwrap();
                assert!((m.value - thm3_lower(horizon, &b).unwrap()).abs() < 1e-12);
                assert!((m.y - (1.0 + m.x) / mu).abs() < 1e-12);
            }
            let (x, y) = argmin_point(1e-12, mu);
            assert!(x.abs() < 1e-11 && (y - 1.0 / mu).abs() < 1e-11);
        }
    }

    #[test]
    fn increasing_along_z() {
        let b = mu_from_gamma(1.0).unwrap();
        let mu = b.mu();
        let h = 1e-6;
        for &t in &[-0.1, -1.0, -3.0] {
            for i in 1..20 {
                for j in 1..20 {
                    let w = 1.0 / mu + (mu - 1.0 / mu) * i as f64 / 20.0;
                    let z = 1.0 / mu + (mu - 1.0 / mu) * j as f64 / 20.0;
                    let (xp, yp) = from_wz(w, z + h);
                    let (xm, ym) = from_wz(w, z - h);
                    let d = bellman_min(t, xp, yp, &b).unwrap().value - bellman_min(t, xm, ym, &b).unwrap().value;
                    assert!(d >= -1e-12);
                }
            }
        }
    }
}

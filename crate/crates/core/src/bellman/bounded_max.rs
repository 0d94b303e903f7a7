//! Value function of the maximization problem with a cubic-form bound.
//!
//! The two square-root regions are written in a rationalized form: the
//! textbook expressions divide `(mu^2+1) W - 2 mu K` by a factor that
//! vanishes on the region's lower seam, which loses every digit there. Using
//! `((mu^2+1) W)^2 - (2 mu K)^2 = (mu^2-1)^2 (K^2 - (mu^2+1)^2 y^2)` and the
//! factorizations of `K - (mu^2+1) y` moves the cancellation out of the way.

use super::{
    check_state, eval_with_nudge, sqrt_radicand, AuxQuantities, BellmanEval, ExtReal, Extremum, Region,
    RegionThresholds,
};
use crate::centroaffine::CubicBound;
use crate::error::{Error, Result};

/// Thresholds at a feasible state.
pub fn thresholds_max(x: f64, y: f64, bound: &CubicBound) -> Result<RegionThresholds> {
    check_state(0.0, x, y, bound)?;
    Ok(thresholds_unchecked(x, y, bound.mu()))
}

pub(crate) fn thresholds_unchecked(x: f64, y: f64, mu: f64) -> RegionThresholds {
    let q = AuxQuantities::new(x, y, mu);
    let a_m = q.a_minus;
    let c_m = q.c_minus.max(0.0);
    let (t_plus1, t_hat) = if a_m <= 0.0 {
        (ExtReal::PosInf, ExtReal::PosInf)
    } else {
        (
            ExtReal::Finite(0.5 * (2.0 * c_m / (a_m * q.c_plus)).ln_1p()),
            ExtReal::Finite(0.5 * (q.b_plus / a_m).ln().max(0.0)),
        )
    };
    let t_star = if x + y > 1.0 {
        let v = 0.5 * ((1.0 - x * x + y * y) / ((y + 1.0 - x) * (x + y - 1.0))).ln();
        // t* >= t-hat holds exactly; only rounding can reverse them.
        ExtReal::Finite(match t_hat {
            ExtReal::Finite(h) => v.max(h),
            ExtReal::PosInf => v,
        })
    } else {
        ExtReal::PosInf
    };
    let t_minus1 = if c_m <= 0.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(0.5 * (2.0 * mu * q.a_minus.max(0.0) / (c_m * q.a_plus)).ln_1p())
    };
    RegionThresholds { t_plus1, t_hat, t_star, t_minus1 }
}

/// Region of `(t, x, y)`; a seam belongs to the earlier region.
pub fn region_max(t: f64, th: &RegionThresholds) -> Region {
    let s = -t;
    if s <= th.t_plus1.to_f64() {
        Region::I
    } else if s <= th.t_hat.to_f64() {
        Region::II
    } else if s <= th.t_star.to_f64() {
        Region::III
    } else {
        Region::IV
    }
}

/// Evaluate one regional formula regardless of which region `(t, x, y)` is in.
pub fn max_region_formula(region: Region, t: f64, x: f64, y: f64, mu: f64) -> Result<BellmanEval> {
    let q = AuxQuantities::new(x, y, mu);
    let m2 = mu * mu;
    let k = mu / (m2 + 1.0);
    let e = (-2.0 * t).exp();
    let eval = |value: f64, w: Option<f64>| BellmanEval { value, region, w };
    match region {
        Region::I => {
            let v = k * ((q.c_plus * e + q.d_minus) / (mu * (q.b_plus - q.a_minus * e))).ln();
            Ok(eval(v, None))
        }
        Region::II => {
            let p = m2 * m2 * x * y - m2 * m2 * y + m2 * mu * x * x - m2 * mu * y * y - m2 * mu + 6.0 * m2 * y
                + mu * x * x
                - mu * y * y
                - mu
                - x * y
                - y;
            let arg = e * (m2 + 1.0) * q.c_plus * q.c_plus / (8.0 * mu * y) + q.c_plus * p / (8.0 * mu * y * q.a_minus);
            Ok(eval(k * arg.ln(), None))
        }
        Region::III => {
            let kk = q.a_minus * q.c_plus * e + m2 * x * y + mu * x * x - mu * y * y - mu - x * y;
            let w = sqrt_radicand(t, x, y, kk, (m2 - 1.0) * y)?;
            let first = 0.5 * ((w + kk) / ((mu + 1.0) * (mu + 1.0) * y)).ln();
            let second = k
                * (2.0 * m2 * q.c_plus * (kk + (m2 + 1.0) * y)
                    / (q.a_minus * ((m2 + 1.0) * w + 2.0 * mu * kk)))
                    .ln();
            Ok(eval(first + second, Some(w)))
        }
        Region::IV => {
            let kk = q.c_minus * q.a_plus * e + m2 * x * y - mu * x * x + mu * y * y + mu - x * y;
            let w = sqrt_radicand(t, x, y, kk, (m2 - 1.0) * y)?;
            let first = 0.5 * ((w + kk) / ((mu + 1.0) * (mu + 1.0) * y)).ln();
            let second = k
                * (2.0 * m2 * (q.a_plus * e - q.b_minus) * (kk + (m2 + 1.0) * y)
                    / (((m2 + 1.0) * w + 2.0 * mu * kk) * (q.c_minus * e + q.d_plus)))
                    .ln();
            Ok(eval(first + second, Some(w)))
        }
    }
}

/// Optimal value of the maximization problem from `(x, y)` with `-t` time left.
pub fn bellman_max(t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<BellmanEval> {
    check_state(t, x, y, bound)?;
    let mu = bound.mu();
    eval_with_nudge(x, y, mu, |x, y| {
        let th = thresholds_unchecked(x, y, mu);
        max_region_formula(region_max(t, &th), t, x, y, mu)
    })
}

/// Optimal feedback control of the maximization problem.
pub fn optimal_control_max(t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<f64> {
    check_state(t, x, y, bound)?;
    let mu = bound.mu();
    let th = thresholds_unchecked(x, y, mu);
    let c_minus = mu * (1.0 - x) - y;
    let s = -t;
    let t_star = th.t_star.to_f64();
    Ok(if c_minus > ON_SIDE_TOL && s < t_star {
        1.0
    } else if c_minus > ON_SIDE_TOL && s == t_star {
        0.0
    } else {
        -1.0
    })
}

/// States this close to a side are treated as lying on it when choosing controls.
pub const ON_SIDE_TOL: f64 = 1e-12;

/// Horizon at which the maximizer leaves the upper-left side's apex branch.
pub fn maximizer_branch_point(bound: &CubicBound) -> f64 {
    crate::bounds::upper_branch_point(bound)
}

/// Closed-form maximizer of `B(-horizon, ., .)` over the feasible set.
pub fn maximal_b(horizon: f64, bound: &CubicBound) -> Result<Extremum> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if bound.is_degenerate() {
        return Err(Error::Domain("bounded problems need mu > 1".into()));
    }
    let (x, y) = argmax_point(horizon, bound.mu());
    let value = bellman_max(-horizon, x, y, bound)?.value;
    Ok(Extremum { x, y, value })
}

pub(crate) fn argmax_point(horizon: f64, mu: f64) -> (f64, f64) {
    let m2 = mu * mu;
    let e = horizon.exp();
    if horizon <= ((m2 + 1.0) / (m2 - 1.0)).ln() {
        let em1 = horizon.exp_m1();
        let den = m2 * em1 + e + 1.0;
        (-(m2 - 1.0) * em1 / den, 2.0 * mu * e / den)
    } else {
        // e / sqrt(e^2 - 1) = 1 / sqrt(1 - e^{-2T})
        let r = 1.0 / (-(-2.0 * horizon).exp_m1()).sqrt();
        (-1.0 + r / mu, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{from_wz, to_wz};
    use crate::bounds::thm2_upper;
    use crate::centroaffine::{mu_from_gamma, state_bounds_check, Side, StateClass};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // The textbook forms of the square-root regions, used as a transcription
    // check away from their singular seam.
    fn textbook(region: Region, t: f64, x: f64, y: f64, mu: f64) -> f64 {
        let q = AuxQuantities::new(x, y, mu);
        let m2 = mu * mu;
        let k = mu / (m2 + 1.0);
        let e = (-2.0 * t).exp();
        let kk = match region {
            Region::III => q.c_plus * q.a_minus * e + m2 * x * y + mu * x * x - mu * y * y - mu - x * y,
            _ => q.c_minus * q.a_plus * e + m2 * x * y - mu * x * x + mu * y * y + mu - x * y,
        };
        let w = (kk * kk - (m2 * y - y).powi(2)).sqrt();
        let first = 0.5 * ((w + kk) / ((mu + 1.0).powi(2) * y)).ln();
        let num = 2.0 * m2 * ((m2 + 1.0) * w - 2.0 * mu * kk);
        let den = match region {
            Region::III => (m2 - 1.0).powi(2) * q.a_minus * (q.a_minus * e - q.b_plus),
            _ => (m2 - 1.0).powi(2) * (q.c_minus * e + q.d_plus) * q.c_minus,
        };
        first + k * (num / den).ln()
    }

    fn random_interior(rng: &mut ChaCha8Rng, mu: f64) -> (f64, f64) {
        let span = mu - 1.0 / mu;
        let w = 1.0 / mu + span * rng.random_range(0.01..0.99);
        let z = 1.0 / mu + span * rng.random_range(0.01..0.99);
        from_wz(w, z)
    }

    #[test]
    fn rationalized_forms_agree_with_textbook_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [0.25, 0.5, 1.0, 1.5] {
            let mu = mu_from_gamma(g).unwrap().mu();
            let mut checked = 0;
            while checked < 200 {
                let (x, y) = random_interior(&mut rng, mu);
                let th = thresholds_unchecked(x, y, mu);
                let s = rng.random_range(0.0..6.0);
                let region = region_max(-s, &th);
                if region < Region::III {
                    continue;
                }
                let lower = if region == Region::III { th.t_hat.to_f64() } else { th.t_star.to_f64() };
                if s - lower < 1e-3 {
                    continue;
                }
                let a = max_region_formula(region, -s, x, y, mu).unwrap().value;
                let b = textbook(region, -s, x, y, mu);
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{region} {a} {b}");
                checked += 1;
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let b = CubicBound::from_mu(2.0).unwrap();
        let th = thresholds_max(0.0, 1.0, &b).unwrap();
        assert!((th.t_plus1.to_f64() - 0.5 * (5.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((th.t_hat.to_f64() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(th.t_star, ExtReal::PosInf);
        // lower-left side: a_- = 0
        let (x, y) = (-0.2, 1.2 / 2.0);
        let th = thresholds_max(x, y, &b).unwrap();
        assert_eq!((th.t_plus1, th.t_hat), (ExtReal::PosInf, ExtReal::PosInf));
        assert!(thresholds_max(0.0, 2.5, &b).is_err());
    }

    #[test]
    fn thresholds_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for g in [0.25, 0.5, 1.0, 1.5] {
            let b = mu_from_gamma(g).unwrap();
            for _ in 0..2000 {
                let (x, y) = random_interior(&mut rng, b.mu());
                let th = thresholds_max(x, y, &b).unwrap();
                assert!(0.0 <= th.t_plus1.to_f64());
                assert!(th.t_plus1.to_f64() <= th.t_hat.to_f64());
                assert!(th.t_hat.to_f64() <= th.t_star.to_f64());
            }
        }
    }

    #[test]
    fn terminal_value_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = mu_from_gamma(0.5).unwrap();
        for _ in 0..500 {
            let (x, y) = random_interior(&mut rng, b.mu());
            let e = bellman_max(0.0, x, y, &b).unwrap();
            assert_eq!(e.region, Region::I);
            assert!(e.value.abs() < 1e-12);
        }
    }

    #[test]
    fn seam_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in [0.25, 0.5, 1.0, 1.5] {
            let mu = mu_from_gamma(g).unwrap().mu();
            let m2 = mu * mu;
            let k = mu / (m2 + 1.0);
            for _ in 0..300 {
                let (x, y) = random_interior(&mut rng, mu);
                let q = AuxQuantities::new(x, y, mu);
                let th = thresholds_unchecked(x, y, mu);
                let t = -th.t_plus1.to_f64();
                let expect = k * ((m2 - 1.0) * q.c_plus / (2.0 * mu * q.a_minus)).ln();
                for r in [Region::I, Region::II] {
                    let v = max_region_formula(r, t, x, y, mu).unwrap().value;
                    assert!((v - expect).abs() < 1e-10 * (1.0 + expect.abs()), "{r} {v} {expect}");
                }
                let t = -th.t_hat.to_f64();
                let expect = k * (mu * q.c_plus / q.a_minus).ln();
                for r in [Region::II, Region::III] {
                    let v = max_region_formula(r, t, x, y, mu).unwrap().value;
                    assert!((v - expect).abs() < 1e-10 * (1.0 + expect.abs()), "{r} {v} {expect}");
                }
                if let ExtReal::Finite(ts) = th.t_star {
                    let expect = 0.5 * ((mu - 1.0) * (y - x + 1.0) / ((mu + 1.0) * (y + x - 1.0))).ln()
                        + k * (2.0 * m2 / (m2 - 1.0)).ln();
                    for r in [Region::III, Region::IV] {
                        let v = max_region_formula(r, -ts, x, y, mu).unwrap().value;
                        assert!((v - expect).abs() < 1e-10 * (1.0 + expect.abs()), "{r} {v} {expect}");
                    }
                }
            }
        }
    }

    #[test]
    fn controls_on_sides() {
        let b = mu_from_gamma(0.5).unwrap();
        let mu = b.mu();
        // upper-right side
        let x = 0.2;
        assert_eq!(optimal_control_max(-1.0, x, mu * (1.0 - x), &b).unwrap(), -1.0);
        // lower-left side: t* infinite and c_- > 0
        let x = -0.1;
        assert_eq!(optimal_control_max(-3.0, x, (1.0 - x) / mu, &b).unwrap(), 1.0);
        assert_eq!(optimal_control_max(-0.1, 0.0, 1.0, &b).unwrap(), 1.0);
    }

    #[test]
    fn maximizer_closed_form() {
        for g in [0.25, 0.5, 1.0, 1.5] {
            let b = mu_from_gamma(g).unwrap();
            for i in 1..=80 {
                let horizon = 0.05 * i as f64;
                let m = maximal_b(horizon, &b).unwrap();
                assert!((m.value - thm2_upper(horizon, &b).unwrap()).abs() < 1e-12, "g={g} T={horizon}");
                match state_bounds_check(m.x, m.y, &b) {
                    StateClass::OnBoundary(s) => assert!(s.contains(Side::UpperLeft)),
                    other => panic!("{other:?}"),
                }
            }
        }
        assert!(maximal_b(0.0, &mu_from_gamma(0.5).unwrap()).is_err());
    }

    #[test]
    fn increasing_along_z() {
        // max over z is at z = mu
        let b = mu_from_gamma(0.5).unwrap();
        let mu = b.mu();
        let h = 1e-6;
        for &t in &[-0.1, -0.7, -2.0, -4.0] {
            for i in 1..20 {
                for j in 1..20 {
                    let w = 1.0 / mu + (mu - 1.0 / mu) * i as f64 / 20.0;
                    let z = 1.0 / mu + (mu - 1.0 / mu) * j as f64 / 20.0;
                    let (xp, yp) = from_wz(w, z + h);
                    let (xm, ym) = from_wz(w, z - h);
                    let d = bellman_max(t, xp, yp, &b).unwrap().value - bellman_max(t, xm, ym, &b).unwrap().value;
                    assert!(d >= -1e-12, "t={t} w={w} z={z} d={d}");
                }
            }
        }
        let _ = to_wz(0.0, 1.0);
    }
}

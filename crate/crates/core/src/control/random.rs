//! Seeded generators of admissible profiles, for fuzzing the length bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::profile::TrajectoryProfile;
use super::trajectory::{TrajectoryBuilder, DEFAULT_STEP};
use super::{ControlLaw, ControlState, System};
use crate::bellman::from_wz;
use crate::bounds::{thm1_upper, thm2_upper, thm3_lower, thm4_geodesic_bounds};
use crate::centroaffine::{check_admissible, feasibility_margin, riemann_length, CubicBound, ImmersionProfile, Side};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

fn random_control(rng: &mut ChaCha8Rng) -> f64 {
    let r: f64 = rng.random();
    if r < 0.2 {
        1.0
    } else if r < 0.4 {
        -1.0
    } else if r < 0.5 {
        0.0
    } else {
        rng.random_range(-1.0..=1.0)
    }
}

fn random_cuts(rng: &mut ChaCha8Rng, horizon: f64, max_pieces: usize) -> Vec<f64> {
    let pieces = rng.random_range(1..=max_pieces);
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.0..horizon)).collect();
    cuts.push(0.0);
    cuts.push(horizon);
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// Bang-singular-style random path: a random interior start and a random
/// piecewise-constant control. If the path reaches the boundary it slides
/// along the side it hit for the remaining time.
pub fn random_admissible_profile(bound: &CubicBound, horizon: f64, seed: u64) -> Result<TrajectoryProfile> {
    random_admissible_profile_with_step(bound, horizon, seed, DEFAULT_STEP)
}

pub fn random_admissible_profile_with_step(
    bound: &CubicBound,
    horizon: f64,
    seed: u64,
    step: f64,
) -> Result<TrajectoryProfile> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = bound.mu();
    let span = mu - 1.0 / mu;
    let (x, y) = from_wz(
        1.0 / mu + span * rng.random_range(0.02..0.98),
        1.0 / mu + span * rng.random_range(0.02..0.98),
    );
    let cuts = random_cuts(&mut rng, horizon, 6);
    let mut b = TrajectoryBuilder::new(System::Bounded(*bound), 0.0, ControlState::new(x, y), 0.0, step)?;
    for w in cuts.windows(2) {
        let u = random_control(&mut rng);
        let exit = move |_t: f64, s: ControlState| feasibility_margin(s.x, s.y, mu);
        if b.arc_until(ControlLaw::Constant(u), w[1] - b.time(), Some(exit))?.is_some() {
            let s = b.state();
            let side = Side::ALL
                .into_iter()
                .min_by(|p, q| p.slack(s.x, s.y, mu).total_cmp(&q.slack(s.x, s.y, mu)))
                .unwrap_or(Side::UpperRight);
            b.arc(ControlLaw::Slide(side), horizon - b.time())?;
            break;
        }
    }
    Ok(TrajectoryProfile::new(b.finish(), 0.0))
}

/// Random convex curve without cubic-form bound: `x' = (1 - x^2)(v - 1)`
/// with `v > 0` piecewise linear, so `h = v (1 - x^2) > 0`.
pub fn random_free_profile(horizon: f64, seed: u64) -> Result<TrajectoryProfile> {
    random_free_profile_with_step(horizon, seed, DEFAULT_STEP)
}

pub fn random_free_profile_with_step(horizon: f64, seed: u64, step: f64) -> Result<TrajectoryProfile> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = rng.random_range(-0.9..0.9);
    let cuts = random_cuts(&mut rng, horizon, 5);
    let mut b = TrajectoryBuilder::new(System::Free, 0.0, ControlState::new(x0, 0.0), 0.0, step)?;
    let mut v0 = rng.random_range(0.05..3.0);
    for w in cuts.windows(2) {
        let v1 = rng.random_range(0.05..3.0);
        if w[1] > w[0] {
            b.arc(ControlLaw::FreeRamp { v0, v1, t0: w[0], t1: w[1] }, w[1] - b.time())?;
        }
        v0 = v1;
    }
    Ok(TrajectoryProfile::new(b.finish(), 0.0))
}

/// Outcome of one fuzz case.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzCase {
    pub seed: u64,
    pub horizon: f64,
    pub length: f64,
    pub lower: f64,
    pub upper: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzReport {
    pub cases: usize,
    pub failures: Vec<FuzzCase>,
    /// Smallest relative distance to either bound over all cases.
    pub tightest_margin: f64,
}

impl FuzzReport {
    fn collect(cases: Vec<FuzzCase>) -> Self {
        let tightest_margin = cases
            .iter()
            .map(|c| ((c.length - c.lower) / c.length).min((c.upper - c.length) / c.length))
            .fold(f64::INFINITY, f64::min);
        let n = cases.len();
        let failures = cases.into_iter().filter(|c| c.failure.is_some()).collect();
        Self { cases: n, failures, tightest_margin }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn horizon_for(seed: u64, range: (f64, f64)) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.random_range(range.0..=range.1)
}

/// Check the bounded-case length bounds on `count` random profiles.
pub fn fuzz_bounded(bound: &CubicBound, count: usize, seed0: u64, horizons: (f64, f64), exec: Exec) -> FuzzReport {
    let cases = par::map_range(exec, count, |i| {
        let seed = seed0 + i as u64;
        let horizon = horizon_for(seed, horizons);
        let check = || -> Result<FuzzCase> {
            let p = random_admissible_profile(bound, horizon, seed)?;
            // the built path may end an ulp short of the request
            let (lo, hi) = p.domain();
            let horizon = hi - lo;
            let length = riemann_length(&p, lo, hi)?;
            let lower = thm3_lower(horizon, bound)?;
            let upper = thm2_upper(horizon, bound)?;
            let (geo_lo, geo_hi) = thm4_geodesic_bounds(horizon, bound)?;
            let rep = check_admissible(&p, bound, 1e-2)?;
            let failure = if !(lower < length && length < upper) {
                Some(format!("length {length} outside ({lower}, {upper})"))
            } else if !(geo_lo <= length && length <= geo_hi) {
                Some(format!("length {length} outside [{geo_lo}, {geo_hi}]"))
            } else if !rep.is_admissible() || !rep.within_state_bounds() {
                Some(format!("profile not admissible: {rep:?}"))
            } else {
                None
            };
            Ok(FuzzCase { seed, horizon, length, lower, upper, failure })
        };
        check().unwrap_or_else(|e| FuzzCase {
            seed,
            horizon,
            length: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
            failure: Some(e.to_string()),
        })
    });
    FuzzReport::collect(cases)
}

/// Check the unconstrained length bound on `count` random convex profiles.
pub fn fuzz_free(count: usize, seed0: u64, horizons: (f64, f64), exec: Exec) -> FuzzReport {
    let cases = par::map_range(exec, count, |i| {
        let seed = seed0 + i as u64;
        let horizon = horizon_for(seed, horizons);
        let check = || -> Result<FuzzCase> {
            let p = random_free_profile(horizon, seed)?;
            let (lo, hi) = p.domain();
            let horizon = hi - lo;
            let length = riemann_length(&p, lo, hi)?;
            let upper = thm1_upper(horizon)?;
            let rep = check_admissible(&p, &CubicBound::from_gamma(0.0)?, 1e-2)?;
            let convex = rep.nonpositive_metric.is_empty() && rep.slope_violations.is_empty();
            let failure = if !(length < upper) {
                Some(format!("length {length} not below {upper}"))
            } else if !convex {
                Some("profile lost convexity".into())
            } else {
                None
            };
            Ok(FuzzCase { seed, horizon, length, lower: 0.0, upper, failure })
        };
        check().unwrap_or_else(|e| FuzzCase {
            seed,
            horizon,
            length: f64::NAN,
            lower: f64::NAN,
            upper: f64::NAN,
            failure: Some(e.to_string()),
        })
    });
    FuzzReport::collect(cases)
}

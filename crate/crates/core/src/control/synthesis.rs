//! Optimal trajectories of the bounded problems, assembled from bang arcs,
//! the singular arc `u = 0` and slides along the sides of the feasible set.
//!
//! Every trajectory runs over `[-horizon, 0]`, so the value function at a
//! sample is `B(t, x, y)`. Switch times are found by bisecting the
//! closed-form thresholds along the flow.

use super::trajectory::{TrajectoryBuilder, DEFAULT_STEP};
use super::{ControlLaw, ControlState, System, Trajectory};
use crate::bellman::bounded_max::{argmax_point, thresholds_unchecked, ON_SIDE_TOL};
use crate::bellman::bounded_min::argmin_point;
use crate::centroaffine::{CubicBound, Side};
use crate::error::{Error, Result};

/// Which of the four patterns the maximizing synthesis follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxPattern {
    /// `+1` throughout.
    Plus,
    /// `+1`, then slide down the upper-right side.
    PlusSlide,
    /// `+1`, singular arc, slide.
    PlusSingularSlide,
    /// `-1`, singular arc, slide.
    MinusSingularSlide,
}

/// Pattern of the maximizing synthesis from `s0` with `horizon` time left.
pub fn max_pattern(s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<MaxPattern> {
    check_start(s0, horizon, bound)?;
    let th = thresholds_unchecked(s0.x, s0.y, bound.mu());
    Ok(if horizon <= th.t_plus1.to_f64() {
        MaxPattern::Plus
    } else if horizon <= th.t_hat.to_f64() {
        MaxPattern::PlusSlide
    } else if horizon <= th.t_star.to_f64() {
        MaxPattern::PlusSingularSlide
    } else {
        MaxPattern::MinusSingularSlide
    })
}

fn check_start(s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !s0.is_feasible(bound) {
        return Err(Error::Infeasible { x: s0.x, y: s0.y });
    }
    Ok(())
}

/// The law applying bang control `u` at `s`: a slide if `s` sits on a side
/// that `u` keeps invariant, a constant otherwise.
fn bang(u: f64, s: ControlState, mu: f64) -> ControlLaw {
    Side::ALL
        .into_iter()
        .find(|side| side.sliding_control() == u && side.slack(s.x, s.y, mu).abs() <= ON_SIDE_TOL)
        .map(ControlLaw::Slide)
        .unwrap_or(ControlLaw::Constant(u))
}

/// Synthesis with a configurable integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthesizer {
    pub step: f64,
}

impl Default for Synthesizer {
    fn default() -> Self {
        Self { step: DEFAULT_STEP }
    }
}

impl Synthesizer {
    pub fn new(step: f64) -> Self {
        Self { step }
    }

    fn hyperbola(&self, bound: &CubicBound, horizon: f64) -> Result<Trajectory> {
        let mut b = TrajectoryBuilder::new(System::Bounded(*bound), -horizon, ControlState::new(0.0, 1.0), 0.0, self.step)?;
        b.arc(ControlLaw::Constant(0.0), horizon)?;
        Ok(b.finish())
    }

    pub fn max_fixed_start(&self, s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
        if bound.is_degenerate() {
            check_start(s0, horizon, bound)?;
            return self.hyperbola(bound, horizon);
        }
        let pattern = max_pattern(s0, horizon, bound)?;
        let mu = bound.mu();
        let th = thresholds_unchecked(s0.x, s0.y, mu);
        let mut b = TrajectoryBuilder::new(System::Bounded(*bound), -horizon, s0, 0.0, self.step)?;
        match pattern {
            MaxPattern::Plus => b.arc(bang(1.0, s0, mu), horizon)?,
            MaxPattern::PlusSlide => {
                let t1 = th.t_plus1.to_f64();
                b.arc(bang(1.0, s0, mu), t1)?;
                b.arc(ControlLaw::Slide(Side::UpperRight), -b.time())?;
            }
            MaxPattern::PlusSingularSlide | MaxPattern::MinusSingularSlide => {
                let u = if pattern == MaxPattern::PlusSingularSlide { 1.0 } else { -1.0 };
                // leave the bang arc when the time left equals t*
                let switch = move |t: f64, s: ControlState| thresholds_unchecked(s.x, s.y, mu).t_star.to_f64() + t;
                b.arc_until(bang(u, s0, mu), horizon, Some(switch))?;
                let s = b.state();
                if mu * (1.0 - s.x) - s.y > ON_SIDE_TOL && b.time() < 0.0 {
                    let reach = move |_t: f64, s: ControlState| mu * (1.0 - s.x) - s.y;
                    b.arc_until(ControlLaw::Constant(0.0), -b.time(), Some(reach))?;
                }
                if b.time() < 0.0 {
                    b.arc(ControlLaw::Slide(Side::UpperRight), -b.time())?;
                }
            }
        }
        Ok(b.finish())
    }

    pub fn max_free(&self, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
        if bound.is_degenerate() {
            return self.hyperbola(bound, horizon);
        }
        check_horizon(horizon)?;
        let (x, y) = argmax_point(horizon, bound.mu());
        self.max_fixed_start(ControlState::new(x, y), horizon, bound)
    }

    pub fn min_fixed_start(&self, s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
        check_start(s0, horizon, bound)?;
        if bound.is_degenerate() {
            return self.hyperbola(bound, horizon);
        }
        let mu = bound.mu();
        let tm = thresholds_unchecked(s0.x, s0.y, mu).t_minus1.to_f64();
        let mut b = TrajectoryBuilder::new(System::Bounded(*bound), -horizon, s0, 0.0, self.step)?;
        if horizon <= tm {
            b.arc(bang(-1.0, s0, mu), horizon)?;
        } else {
            b.arc(bang(-1.0, s0, mu), tm)?;
            b.arc(ControlLaw::Slide(Side::LowerLeft), -b.time())?;
        }
        Ok(b.finish())
    }

    pub fn min_free(&self, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
        if bound.is_degenerate() {
            return self.hyperbola(bound, horizon);
        }
        check_horizon(horizon)?;
        let (x, y) = argmin_point(horizon, bound.mu());
        self.min_fixed_start(ControlState::new(x, y), horizon, bound)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

pub fn synthesize_max_fixed_start(s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
    Synthesizer::default().max_fixed_start(s0, horizon, bound)
}

pub fn synthesize_max_free(horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
    Synthesizer::default().max_free(horizon, bound)
}

pub fn synthesize_min_fixed_start(s0: ControlState, horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
    Synthesizer::default().min_fixed_start(s0, horizon, bound)
}

pub fn synthesize_min_free(horizon: f64, bound: &CubicBound) -> Result<Trajectory> {
    Synthesizer::default().min_free(horizon, bound)
}

/// Free-problem paths stop this long before `t = 0`, where the optimal
/// feedback is singular.
pub const FREE_STOP: f64 = 1e-9;

/// Near-extremal path of the problem without cubic-form bound: the optimal
/// feedback scaled by `scale < 1`, started at `x = -scale`. The curve stays
/// strictly convex, `h >= (1 - scale)(1 + scale x^2 / scale^2) > 0`, and its
/// length tends to the free bound as `scale -> 1`.
pub fn synthesize_free(horizon: f64, scale: f64, step: f64) -> Result<Trajectory> {
    check_horizon(horizon)?;
    if !(scale > 0.0 && scale < 1.0) {
        return Err(Error::Domain(format!("scale must lie in (0, 1), got {scale}")));
    }
    if horizon <= FREE_STOP {
        return Err(Error::Domain(format!("horizon {horizon} is too short")));
    }
    let mut b = TrajectoryBuilder::new(System::Free, -horizon, ControlState::new(-scale, 0.0), 0.0, step)?;
    b.arc(ControlLaw::FreeFeedback { scale }, horizon - FREE_STOP)?;
    Ok(b.finish())
}

/// A maximizing free trajectory continued towards both corners.
#[derive(Debug, Clone)]
pub struct CornerExtension {
    pub trajectory: Trajectory,
    /// Distance from the first sample to the left corner.
    pub left_gap: f64,
    /// Distance from the last sample to the right corner.
    pub right_gap: f64,
}

/// Prepend a `+1` slide along the upper-left side (integrated backwards) and
/// append a `-1` slide along the upper-right side, each of length `horizon`.
pub fn extend_to_corners(traj: &Trajectory, bound: &CubicBound, horizon: f64, step: f64) -> Result<CornerExtension> {
    let mu = bound.mu();
    let (first, last) = (traj.first(), traj.last());
    if Side::UpperLeft.slack(first.x, first.y, mu).abs() > 1e-9 || Side::UpperRight.slack(last.x, last.y, mu).abs() > 1e-9 {
        return Err(Error::Synthesis("extension needs a trajectory from the upper-left to the upper-right side".into()));
    }
    let ext = traj
        .prepend_backward(ControlLaw::Slide(Side::UpperLeft), horizon, step)?
        .append(ControlLaw::Slide(Side::UpperRight), horizon, step)?;
    let dist = |(x, y): (f64, f64), s: super::Sample| ((s.x - x).powi(2) + (s.y - y).powi(2)).sqrt();
    Ok(CornerExtension {
        left_gap: dist(bound.left_corner(), ext.first()),
        right_gap: dist(bound.right_corner(), ext.last()),
        trajectory: ext,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{bellman_max, bellman_min};
    use crate::bounds::{thm2_upper, thm3_lower, upper_branch_point};
    use crate::centroaffine::{feasibility_margin, mu_from_gamma};

    #[test]
    fn fixed_start_patterns_and_costs() {
        let b = mu_from_gamma(0.5).unwrap();
        let s0 = ControlState::new(0.0, 1.1);
        let expect = [
            (0.05, MaxPattern::Plus, 1),
            (0.5, MaxPattern::PlusSlide, 2),
            (1.0, MaxPattern::PlusSingularSlide, 3),
            (2.0, MaxPattern::MinusSingularSlide, 3),
            (4.0, MaxPattern::MinusSingularSlide, 3),
        ];
        for (horizon, pattern, arcs) in expect {
            assert_eq!(max_pattern(s0, horizon, &b).unwrap(), pattern);
            let tr = synthesize_max_fixed_start(s0, horizon, &b).unwrap();
            assert_eq!(tr.segments().len(), arcs, "T={horizon}: {:?}", tr.tags());
            let v = bellman_max(-horizon, s0.x, s0.y, &b).unwrap().value;
            assert!((tr.running_cost() - v).abs() < 1e-8, "T={horizon}: {} vs {v}", tr.running_cost());
            assert!((tr.duration() - horizon).abs() < 1e-12);
            for s in tr.samples() {
                assert!(feasibility_margin(s.x, s.y, b.mu()) > -1e-9);
            }
        }
    }

    #[test]
    fn free_max_cost_symmetry_and_boundary() {
        let b = mu_from_gamma(0.5).unwrap();
        let branch = upper_branch_point(&b);
        for horizon in [0.5, 1.0, 2.0, 4.0] {
            let tr = synthesize_max_free(horizon, &b).unwrap();
            assert!((tr.running_cost() - thm2_upper(horizon, &b).unwrap()).abs() < 1e-8);
            assert!(tr.mirror_error() < 1e-6, "T={horizon}: {}", tr.mirror_error());
            let on_boundary = tr.samples().iter().all(|s| feasibility_margin(s.x, s.y, b.mu()).abs() < 1e-9);
            assert_eq!(on_boundary, horizon <= branch, "T={horizon}");
            let arcs = if horizon <= branch { 2 } else { 3 };
            assert_eq!(tr.segments().len(), arcs);
        }
    }

    #[test]
    fn free_paths_approach_the_free_bound() {
        let horizon = 2.0;
        let bound = crate::bounds::thm1_upper(horizon).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let tr = synthesize_free(horizon, 1.0 - eps, DEFAULT_STEP).unwrap();
            let gap = bound - tr.running_cost();
            assert!(gap > 0.0 && gap < prev, "eps={eps}: gap {gap}");
            prev = gap;
            assert!((tr.last().x - (1.0 - eps)).abs() < 1e-6);
        }
        assert!(prev < 1e-3 * bound);
        assert!(synthesize_free(horizon, 1.0, DEFAULT_STEP).is_err());
    }

    #[test]
    fn min_syntheses() {
        let b = mu_from_gamma(0.5).unwrap();
        let s0 = ControlState::new(0.0, 1.1);
        for horizon in [0.5, 1.0, 2.0, 4.0] {
            let tr = synthesize_min_fixed_start(s0, horizon, &b).unwrap();
            let v = bellman_min(-horizon, s0.x, s0.y, &b).unwrap().value;
            assert!((tr.running_cost() - v).abs() < 1e-8);
            let free = synthesize_min_free(horizon, &b).unwrap();
            assert!((free.running_cost() - thm3_lower(horizon, &b).unwrap()).abs() < 1e-8);
            assert!(free.mirror_error() < 1e-6);
            assert!(free.samples().iter().all(|s| feasibility_margin(s.x, s.y, b.mu()).abs() < 1e-9));
            assert_eq!(free.tags(), vec!["slide(lower-right)", "slide(lower-left)"]);
        }
        // short horizon from an interior start: a single -1 arc
        let tr = synthesize_min_fixed_start(s0, 0.05, &b).unwrap();
        assert_eq!(tr.tags(), vec!["const(-1)"]);
    }

    #[test]
    fn extension_approaches_corners() {
        let b = mu_from_gamma(0.5).unwrap();
        let tr = synthesize_max_free(1.0, &b).unwrap();
        let short = extend_to_corners(&tr, &b, 2.0, 1e-3).unwrap();
        let long = extend_to_corners(&tr, &b, 8.0, 1e-3).unwrap();
        assert!(long.left_gap < short.left_gap && long.right_gap < short.right_gap);
        assert!(long.left_gap < 1e-3 && long.right_gap < 1e-3, "{} {}", long.left_gap, long.right_gap);
        assert!(long.trajectory.mirror_error() < 1e-6);
    }

    #[test]
    fn degenerate_bound_gives_hyperbola() {
        let b = mu_from_gamma(0.0).unwrap();
        let tr = synthesize_max_free(2.0, &b).unwrap();
        assert!((tr.running_cost() - 2.0).abs() < 1e-12);
        assert!(synthesize_max_free(-1.0, &mu_from_gamma(0.5).unwrap()).is_err());
        assert!(synthesize_max_fixed_start(ControlState::new(0.0, 3.0), 1.0, &mu_from_gamma(0.5).unwrap()).is_err());
    }
}

//! Curves reconstructed from trajectories: `alpha' = x`, `h = y^2`.

use super::trajectory::{jet_at, TrajectoryBuilder};
use super::{ControlLaw, ControlState, System, Trajectory};
use crate::centroaffine::{ImmersionProfile, Jet, Smoothness};
use crate::error::{Error, Result};

/// An immersion profile backed by an integrated trajectory. Between samples
/// the jet comes from a single RK4 sub-step of the owning arc's law.
#[derive(Debug, Clone)]
pub struct TrajectoryProfile {
    traj: Trajectory,
    alpha_shift: f64,
    corners: Vec<f64>,
    joins: Vec<f64>,
}

impl TrajectoryProfile {
    pub fn new(traj: Trajectory, alpha0: f64) -> Self {
        let sys = traj.system();
        let mut corners = Vec::new();
        let mut joins = Vec::new();
        for pair in traj.segments().windows(2) {
            let s = traj.samples()[pair[1].first];
            joins.push(s.t);
            let left = jet_at(&sys, &pair[0].law, s.t, s.x, s.y, s.alpha).d3;
            let right = jet_at(&sys, &pair[1].law, s.t, s.x, s.y, s.alpha).d3;
            if (left - right).abs() > 1e-12 * (1.0 + left.abs().max(right.abs())) {
                corners.push(s.t);
            }
        }
        let alpha_shift = alpha0 - traj.first().alpha;
        Self { traj, alpha_shift, corners, joins }
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }
}

impl ImmersionProfile for TrajectoryProfile {
    fn domain(&self) -> (f64, f64) {
        (self.traj.start_time(), self.traj.end_time())
    }

    fn smoothness(&self) -> Smoothness {
        if self.corners.is_empty() {
            Smoothness::C3
        } else {
            Smoothness::PiecewiseAnalytic
        }
    }

    fn jet(&self, t: f64) -> Result<Jet> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!("t = {t} outside profile domain [{lo}, {hi}]")));
        }
        let samples = self.traj.samples();
        let k = samples.partition_point(|s| s.t <= t).clamp(1, samples.len()) - 1;
        let s = samples[k];
        let shift = |mut j: Jet| {
            j.alpha += self.alpha_shift;
            j
        };
        if t == s.t || k + 1 == samples.len() {
            return Ok(shift(self.traj.jet_at_sample(k)));
        }
        let law = match self.traj.segment_of(k) {
            Some(seg) => seg.law,
            None => return Ok(shift(self.traj.jet_at_sample(k))),
        };
        let (x, y, alpha) = self.traj.substep(k, &law, t - s.t);
        Ok(shift(jet_at(&self.traj.system(), &law, t, x, y, alpha)))
    }

    fn corners(&self) -> Vec<f64> {
        self.corners.clone()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.joins.clone()
    }
}

fn degrade_slide(law: ControlLaw, s: ControlState, system: &System) -> ControlLaw {
    match (law, system) {
        (ControlLaw::Slide(side), System::Bounded(b)) if side.slack(s.x, s.y, b.mu()).abs() > 1e-10 => {
            ControlLaw::Constant(side.sliding_control())
        }
        _ => law,
    }
}

/// Profile of a trajectory. With `smoothing > 0` every jump of the control
/// is replaced by a smooth ramp over the `smoothing`-long window ending at the
/// jump, and the path is re-integrated. Ramps between admissible values stay
/// admissible, so the cubic bound still holds; the result is `C^3`.
pub fn profile_from_trajectory(traj: &Trajectory, alpha0: f64, smoothing: f64) -> Result<TrajectoryProfile> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::Domain(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    if smoothing == 0.0 {
        return Ok(TrajectoryProfile::new(traj.clone(), alpha0));
    }
    let step = traj
        .segments()
        .iter()
        .map(|s| s.duration() / (s.last - s.first) as f64)
        .fold(f64::INFINITY, f64::min);
    let first = traj.first();
    let system = traj.system();
    let mut b = TrajectoryBuilder::new(system, first.t, ControlState::new(first.x, first.y), alpha0, step)?;
    let segs = traj.segments();
    for (j, seg) in segs.iter().enumerate() {
        let mut main = seg.duration();
        let mut ramp = None;
        if let Some(next) = segs.get(j + 1) {
            let join = traj.samples()[seg.last];
            let from = seg.law.control(join.t, join.x);
            let to = next.law.control(join.t, join.x);
            if (from - to).abs() > 1e-12 {
                if smoothing >= main {
                    return Err(Error::Smoothing { window: smoothing, length: main });
                }
                main -= smoothing;
                ramp = Some(ControlLaw::Blend { from, to, start: seg.t_end - smoothing, width: smoothing });
            }
        }
        let law = degrade_slide(seg.law, b.state(), &system);
        b.arc(law, main)?;
        if let Some(r) = ramp {
            b.arc(r, smoothing)?;
        }
    }
    Ok(TrajectoryProfile::new(b.finish(), alpha0))
}

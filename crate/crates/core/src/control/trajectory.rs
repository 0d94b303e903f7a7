//! Fixed-step RK4 integration of arcs and the resulting trajectories.

use std::io::Write;

use super::{field, ControlLaw, ControlState, System};
use crate::centroaffine::{feasibility_margin, Jet, STATE_TOL};
use crate::error::{Error, Result};
use crate::quad::simpson_samples;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Bisection on event functions stops once the bracket is this short.
const EVENT_TIME_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub alpha: f64,
}

/// A maximal stretch of a trajectory driven by one control law. Neighbouring
/// segments share their join sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub law: ControlLaw,
    pub first: usize,
    pub last: usize,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    x: f64,
    y: f64,
    alpha: f64,
}

fn deriv(system: &System, law: &ControlLaw, t: f64, p: Phase) -> Phase {
    let u = law.control(t, p.x);
    match system {
        System::Bounded(b) => {
            let (dx, dy) = field(p.x, p.y, u, b.gamma());
            Phase { x: dx, y: dy, alpha: p.x }
        }
        System::Free => Phase { x: u, y: 0.0, alpha: p.x },
    }
}

fn rk4(system: &System, law: &ControlLaw, t: f64, p: Phase, h: f64) -> Phase {
    let add = |a: Phase, k: Phase, s: f64| Phase { x: a.x + s * k.x, y: a.y + s * k.y, alpha: a.alpha + s * k.alpha };
    let k1 = deriv(system, law, t, p);
    let k2 = deriv(system, law, t + 0.5 * h, add(p, k1, 0.5 * h));
    let k3 = deriv(system, law, t + 0.5 * h, add(p, k2, 0.5 * h));
    let k4 = deriv(system, law, t + h, add(p, k3, h));
    Phase {
        x: p.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: p.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        alpha: p.alpha + h / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha),
    }
}

fn project(system: &System, law: &ControlLaw, p: Phase) -> Phase {
    match (system, law) {
        (System::Bounded(b), ControlLaw::Slide(side)) => Phase { y: side.y_at(p.x, b.mu()), ..p },
        _ => p,
    }
}

fn advance(system: &System, law: &ControlLaw, t: f64, p: Phase, h: f64) -> Phase {
    project(system, law, rk4(system, law, t, p, h))
}

/// `y` as seen by the cost: the state itself, or `sqrt(u - x^2 + 1)` for the free problem.
fn observed_y(system: &System, law: &ControlLaw, t: f64, p: Phase) -> f64 {
    match system {
        System::Bounded(_) => p.y,
        System::Free => {
            let h = law.control(t, p.x) - p.x * p.x + 1.0;
            h.max(0.0).sqrt()
        }
    }
}

fn check_phase(system: &System, law: &ControlLaw, t: f64, p: Phase) -> Result<()> {
    let fault = |reason: String| Err(Error::Integration { t, reason });
    if !(p.x.is_finite() && p.y.is_finite() && p.alpha.is_finite()) {
        return fault("state is no longer finite".into());
    }
    match system {
        System::Bounded(b) => {
            let m = feasibility_margin(p.x, p.y, b.mu());
            if m < -STATE_TOL {
                return fault(format!("state ({}, {}) left the feasible set by {:e} under {law}", p.x, p.y, -m));
            }
        }
        System::Free => {
            let h = law.control(t, p.x) - p.x * p.x + 1.0;
            if !(h > -1e-12) || p.x.abs() > 1.0 + STATE_TOL {
                return fault(format!("free path lost convexity at x = {} (h = {h})", p.x));
            }
        }
    }
    Ok(())
}

fn sample_of(system: &System, law: &ControlLaw, t: f64, p: Phase) -> Sample {
    Sample { t, x: p.x, y: observed_y(system, law, t, p), u: law.control(t, p.x), alpha: p.alpha }
}

/// Jet of `alpha` at a state under a law.
pub(crate) fn jet_at(system: &System, law: &ControlLaw, t: f64, x: f64, y_state: f64, alpha: f64) -> Jet {
    let u = law.control(t, x);
    match system {
        System::Bounded(b) => {
            let (dx, dy) = field(x, y_state, u, b.gamma());
            Jet { alpha, d1: x, d2: dx, d3: 2.0 * y_state * dy + 2.0 * x * dx }
        }
        System::Free => Jet { alpha, d1: x, d2: u, d3: law.control_rate(t, x, u) },
    }
}

/// Assembles a trajectory arc by arc.
#[derive(Debug, Clone)]
pub struct TrajectoryBuilder {
    system: System,
    step: f64,
    samples: Vec<Sample>,
    segments: Vec<Segment>,
}

impl TrajectoryBuilder {
    pub fn new(system: System, t0: f64, s0: ControlState, alpha0: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!("step must be positive, got {step}")));
        }
        if !(t0.is_finite() && s0.x.is_finite() && alpha0.is_finite()) {
            return Err(Error::Domain("initial data must be finite".into()));
        }
        if let System::Bounded(b) = system {
            if !s0.is_feasible(&b) {
                return Err(Error::Infeasible { x: s0.x, y: s0.y });
            }
        } else if s0.x.abs() >= 1.0 {
            return Err(Error::Domain(format!("free paths need |x| < 1, got {}", s0.x)));
        }
        let first = Sample { t: t0, x: s0.x, y: s0.y, u: f64::NAN, alpha: alpha0 };
        Ok(Self { system, step, samples: vec![first], segments: Vec::new() })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn state(&self) -> ControlState {
        let s = self.samples[self.samples.len() - 1];
        ControlState::new(s.x, self.phase().y)
    }

    /// Underlying integration state of the last sample (the free problem
    /// keeps its `y` slot unused).
    fn phase(&self) -> Phase {
        let s = self.samples[self.samples.len() - 1];
        Phase { x: s.x, y: s.y, alpha: s.alpha }
    }

    /// Integrate `law` for `duration`.
    pub fn arc(&mut self, law: ControlLaw, duration: f64) -> Result<()> {
        self.arc_until(law, duration, None::<fn(f64, ControlState) -> f64>).map(|_| ())
    }

    /// Integrate `law` for at most `duration`, stopping early when `event`
    /// changes sign. Returns the elapsed time if the event fired.
    pub fn arc_until<F>(&mut self, law: ControlLaw, duration: f64, event: Option<F>) -> Result<Option<f64>>
    where
        F: Fn(f64, ControlState) -> f64,
    {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::Domain(format!("arc duration must be finite and nonnegative, got {duration}")));
        }
        let sys = self.system;
        let t_start = self.time();
        let mut p = self.phase();
        let state = |p: Phase| ControlState::new(p.x, p.y);
        let f0 = event.as_ref().map(|f| f(t_start, state(p)));
        if let Some(f0) = f0 {
            if f0 == 0.0 || f0.is_nan() {
                return Ok(Some(0.0));
            }
        }
        if duration <= 1e-14 {
            return Ok(None);
        }
        let first = self.samples.len() - 1;
        {
            let s = &mut self.samples[first];
            s.u = law.control(t_start, s.x);
            if matches!(sys, System::Free) {
                s.y = observed_y(&sys, &law, t_start, p);
            }
        }
        let t_end = t_start + duration;
        let uniform_n = if law.adaptive() {
            0
        } else {
            ((duration / law.max_step(t_start, self.step)) - 1e-9).ceil().max(1.0) as usize
        };
        let mut fired = None;
        let mut i = 0usize;
        let mut t = t_start;
        loop {
            let (t_next, h) = if law.adaptive() {
                let h = law.max_step(t, self.step).min(t_end - t);
                let tn = if t_end - (t + h) <= 1e-15 * (1.0 + t_end.abs()) { t_end } else { t + h };
                (tn, tn - t)
            } else {
                let tn = if i + 1 == uniform_n { t_end } else { t_start + (i + 1) as f64 * (duration / uniform_n as f64) };
                (tn, tn - t)
            };
            let next = advance(&sys, &law, t, p, h);
            if let (Some(f), Some(f0)) = (event.as_ref(), f0) {
                let f1 = f(t_next, state(next));
                if crossed(f0, f1) {
                    let (mut lo, mut hi) = (0.0, h);
                    while hi - lo > EVENT_TIME_TOL {
                        let mid = 0.5 * (lo + hi);
                        let pm = advance(&sys, &law, t, p, mid);
                        if crossed(f0, f(t + mid, state(pm))) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let pe = advance(&sys, &law, t, p, hi);
                    check_phase(&sys, &law, t + hi, pe)?;
                    self.samples.push(sample_of(&sys, &law, t + hi, pe));
                    fired = Some(t + hi - t_start);
                    break;
                }
            }
            check_phase(&sys, &law, t_next, next)?;
            self.samples.push(sample_of(&sys, &law, t_next, next));
            p = next;
            t = t_next;
            i += 1;
            if t >= t_end {
                break;
            }
        }
        let last = self.samples.len() - 1;
        if last == first {
            return Ok(fired);
        }
        self.segments.push(Segment { t_start, t_end: self.samples[last].t, law, first, last });
        Ok(fired)
    }

    pub fn finish(mut self) -> Trajectory {
        if self.segments.is_empty() {
            // A trajectory of zero duration: keep the single sample.
            self.samples[0].u = 0.0;
        }
        Trajectory::from_parts(self.system, self.samples, self.segments)
    }
}

fn crossed(f0: f64, f1: f64) -> bool {
    (f0 > 0.0 && !(f1 > 0.0)) || (f0 < 0.0 && !(f1 < 0.0))
}

/// A sampled path with its arc structure and accumulated cost `∫ y dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    system: System,
    samples: Vec<Sample>,
    segments: Vec<Segment>,
    running_cost: f64,
}

impl Trajectory {
    fn from_parts(system: System, samples: Vec<Sample>, segments: Vec<Segment>) -> Self {
        let running_cost = segments
            .iter()
            .map(|s| {
                let ts: Vec<f64> = samples[s.first..=s.last].iter().map(|p| p.t).collect();
                let ys: Vec<f64> = samples[s.first..=s.last].iter().map(|p| p.y).collect();
                simpson_samples(&ts, &ys)
            })
            .sum();
        Self { system, samples, segments, running_cost }
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn running_cost(&self) -> f64 {
        self.running_cost
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn first(&self) -> Sample {
        self.samples[0]
    }

    pub fn last(&self) -> Sample {
        self.samples[self.samples.len() - 1]
    }

    /// Arc tags in order.
    pub fn tags(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.law.tag()).collect()
    }

    /// Segment owning sample `index` (the later one at a join).
    pub fn segment_of(&self, index: usize) -> Option<&Segment> {
        let k = self.segments.partition_point(|s| s.first <= index);
        if k == 0 {
            return None;
        }
        let seg = &self.segments[k - 1];
        if index < seg.last || (index == seg.last && k == self.segments.len()) {
            Some(seg)
        } else {
            None
        }
    }

    /// Linear interpolation of `(x, y)` at time `t` inside the trajectory.
    pub fn interpolate(&self, t: f64) -> Option<(f64, f64)> {
        if !(t >= self.start_time() && t <= self.end_time()) {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t <= t).clamp(1, self.samples.len() - 1);
        let (a, b) = (self.samples[k - 1], self.samples[k]);
        let s = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        Some((a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)))
    }

    /// Largest violation of the mirror symmetry `x(t) = -x(t0 + t1 - t)`,
    /// `y(t) = y(t0 + t1 - t)` over the samples.
    pub fn mirror_error(&self) -> f64 {
        let (t0, t1) = (self.start_time(), self.end_time());
        self.samples
            .iter()
            .map(|s| match self.interpolate((t0 + t1 - s.t).clamp(t0, t1)) {
                Some((x, y)) => (s.x + x).abs().max((s.y - y).abs()),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Jet of `alpha` at sample `index`.
    pub fn jet_at_sample(&self, index: usize) -> Jet {
        let s = self.samples[index];
        let law = self.segment_of(index).map(|g| g.law).unwrap_or(ControlLaw::Constant(s.u));
        jet_at(&self.system, &law, s.t, s.x, s.y, s.alpha)
    }

    /// Advance from sample `index` by `dt` under its segment's law.
    pub(crate) fn substep(&self, index: usize, law: &ControlLaw, dt: f64) -> (f64, f64, f64) {
        let s = self.samples[index];
        let y = match self.system {
            System::Bounded(_) => s.y,
            System::Free => 0.0,
        };
        let p = advance(&self.system, law, s.t, Phase { x: s.x, y, alpha: s.alpha }, dt);
        (p.x, p.y, p.alpha)
    }

    /// Attach a backward-integrated arc of length `duration` in front of the trajectory.
    pub fn prepend_backward(&self, law: ControlLaw, duration: f64, step: f64) -> Result<Trajectory> {
        if duration <= 0.0 {
            return Ok(self.clone());
        }
        let first = self.samples[0];
        let n = (duration / step).ceil().max(1.0) as usize;
        let h = duration / n as f64;
        let mut p = Phase { x: first.x, y: first.y, alpha: first.alpha };
        let mut rev = Vec::with_capacity(n);
        for i in 0..n {
            let t = first.t - i as f64 * h;
            p = advance(&self.system, &law, t, p, -h);
            let tn = if i + 1 == n { first.t - duration } else { first.t - (i + 1) as f64 * h };
            check_phase(&self.system, &law, tn, p)?;
            rev.push(sample_of(&self.system, &law, tn, p));
        }
        rev.reverse();
        let shift = rev.len();
        let mut samples = rev;
        samples.extend(self.samples.iter().copied());
        let mut segments = vec![Segment { t_start: first.t - duration, t_end: first.t, law, first: 0, last: shift }];
        segments.extend(self.segments.iter().map(|s| Segment { first: s.first + shift, last: s.last + shift, ..*s }));
        Ok(Trajectory::from_parts(self.system, samples, segments))
    }

    /// Continue the trajectory forward with another arc.
    pub fn append(&self, law: ControlLaw, duration: f64, step: f64) -> Result<Trajectory> {
        let mut b = TrajectoryBuilder {
            system: self.system,
            step,
            samples: self.samples.clone(),
            segments: self.segments.clone(),
        };
        b.arc(law, duration)?;
        Ok(b.finish())
    }

    pub const CSV_HEADER: [&'static str; 8] = ["t", "x", "y", "u", "alpha", "h", "C", "region"];

    /// One row per sample: `t,x,y,u,alpha,h,C,region`, the last column being the arc tag.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER).map_err(io)?;
        for (i, s) in self.samples.iter().enumerate() {
            let jet = self.jet_at_sample(i);
            let tag = self.segment_of(i).map(|g| g.law.tag()).unwrap_or_else(|| "const(0)".into());
            let nums = [s.t, s.x, s.y, s.u, s.alpha, jet.metric(), jet.cubic()].map(crate::fmt_f64);
            let mut rec: Vec<String> = nums.to_vec();
            rec.push(tag);
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Convenience wrapper for single-arc integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub step: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { step: DEFAULT_STEP }
    }
}

impl Integrator {
    pub fn new(step: f64) -> Self {
        Self { step }
    }

    /// Integrate one law from `t0` to `t1`; `t1 < t0` integrates backwards.
    pub fn integrate(&self, system: System, s0: ControlState, law: ControlLaw, t0: f64, t1: f64) -> Result<Trajectory> {
        if t1 >= t0 {
            let mut b = TrajectoryBuilder::new(system, t0, s0, 0.0, self.step)?;
            b.arc(law, t1 - t0)?;
            Ok(b.finish())
        } else {
            let b = TrajectoryBuilder::new(system, t0, s0, 0.0, self.step)?.finish();
            b.prepend_backward(law, t0 - t1, self.step)
        }
    }

    /// Integrate until the state leaves the feasible set or `t1` is reached.
    /// Returns the trajectory and the exit time, if any.
    pub fn run_until_exit(
        &self,
        bound: &crate::centroaffine::CubicBound,
        s0: ControlState,
        law: ControlLaw,
        t0: f64,
        t1: f64,
    ) -> Result<(Trajectory, Option<f64>)> {
        let mu = bound.mu();
        let mut b = TrajectoryBuilder::new(System::Bounded(*bound), t0, s0, 0.0, self.step)?;
        let fired = b.arc_until(law, t1 - t0, Some(move |_t: f64, s: ControlState| feasibility_margin(s.x, s.y, mu)))?;
        Ok((b.finish(), fired.map(|d| t0 + d)))
    }
}

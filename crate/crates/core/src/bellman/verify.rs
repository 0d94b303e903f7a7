//! Numerical certification of the value functions: the dynamic-programming
//! inequality along every sampled control, continuity across region seams,
//! and the closed-form extremizers against a grid search.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bounded_max::{argmax_point, max_region_formula, thresholds_unchecked};
use super::bounded_min::{argmin_point, min_region_formula};
use super::{
    bellman_free, bellman_max, bellman_min, from_wz, optimal_control_max, optimal_control_min, optimal_u_free, to_wz,
    AuxQuantities, ExtReal, Region,
};
use crate::centroaffine::{feasibility_margin, CubicBound};
use crate::control::field;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    FreeMax,
    BoundedMax,
    BoundedMin,
}

impl Problem {
    pub const ALL: [Problem; 3] = [Problem::FreeMax, Problem::BoundedMax, Problem::BoundedMin];

    pub fn name(self) -> &'static str {
        match self {
            Problem::FreeMax => "free-max",
            Problem::BoundedMax => "bounded-max",
            Problem::BoundedMin => "bounded-min",
        }
    }

    fn is_max(self) -> bool {
        !matches!(self, Problem::BoundedMin)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown problem '{s}'")))
    }
}

/// Sample points for the certification run. States are laid out on a
/// `(w, z)` grid strictly inside the feasible square; the free problem uses
/// as many evenly spaced abscissae in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationGrid {
    pub w_samples: Vec<f64>,
    pub z_samples: Vec<f64>,
    pub times: Vec<f64>,
    pub controls: usize,
}

impl VerificationGrid {
    /// `n x n` states kept `1e-3` of the square's width off its edges,
    /// `times` instants evenly spread over `[-4, -0.05]`.
    pub fn interior(bound: &CubicBound, n: usize, times: usize, controls: usize) -> Result<Self> {
        if n < 2 || times < 1 || controls < 2 {
            return Err(Error::Domain(format!("grid too small: n={n}, times={times}, controls={controls}")));
        }
        let mu = if bound.is_degenerate() { 2.0 } else { bound.mu() };
        let margin = 1e-3 * (mu - 1.0 / mu);
        let (lo, hi) = (1.0 / mu + margin, mu - margin);
        let axis: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let times = if times == 1 {
            vec![-1.0]
        } else {
            (0..times).map(|k| -4.0 + 3.95 * k as f64 / (times - 1) as f64).collect()
        };
        Ok(Self { w_samples: axis.clone(), z_samples: axis, times, controls })
    }

    fn bounded_states(&self, bound: &CubicBound) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(self.w_samples.len() * self.z_samples.len());
        for &w in &self.w_samples {
            for &z in &self.z_samples {
                let (x, y) = from_wz(w, z);
                if !(feasibility_margin(x, y, bound.mu()) > 0.0) {
                    return Err(Error::Domain(format!("grid point (w, z) = ({w}, {z}) is not interior")));
                }
                out.push((x, y));
            }
        }
        Ok(out)
    }

    fn free_states(&self) -> Vec<(f64, f64)> {
        let n = self.w_samples.len() * self.z_samples.len();
        (0..n)
            .map(|i| (-0.999 + 1.998 * i as f64 / (n.max(2) - 1) as f64, f64::NAN))
            .collect()
    }
}

/// One residual evaluation, in the verification CSV layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub residual: f64,
    pub region: String,
    pub pass: bool,
    /// How far past its threshold the residual is; zero when passing.
    pub excess: f64,
}

pub const VERIFY_HEADER: [&str; 7] = ["t", "x", "y", "u", "residual", "region", "pass"];

pub fn write_rows<W: Write>(rows: &[ResidualRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER).map_err(io)?;
    for r in rows {
        let mut rec: Vec<String> = [r.t, r.x, r.y, r.u, r.residual].map(crate::fmt_f64).to_vec();
        rec.push(r.region.clone());
        rec.push(r.pass.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

const WORST_KEPT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub problem: Problem,
    pub checks: usize,
    pub violations: usize,
    /// Largest `|residual|` under the optimal control.
    pub max_optimal_residual: f64,
    /// Largest signed residual in the forbidden direction over all controls.
    pub max_sign_residual: f64,
    /// Up to ten violations, worst first.
    pub worst: Vec<ResidualRow>,
    /// Every evaluation, when requested.
    pub rows: Vec<ResidualRow>,
}

impl VerificationReport {
    fn empty(problem: Problem) -> Self {
        Self {
            problem,
            checks: 0,
            violations: 0,
            max_optimal_residual: 0.0,
            max_sign_residual: f64::NEG_INFINITY,
            worst: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.checks += other.checks;
        self.violations += other.violations;
        self.max_optimal_residual = self.max_optimal_residual.max(other.max_optimal_residual);
        self.max_sign_residual = self.max_sign_residual.max(other.max_sign_residual);
        self.worst.extend(other.worst);
        self.worst.sort_by(|a, b| b.excess.total_cmp(&a.excess));
        self.worst.truncate(WORST_KEPT);
        self.rows.extend(other.rows);
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "problem={} checks={} violations={} max_optimal_residual={:e} max_sign_residual={:e} status={}",
            self.problem,
            self.checks,
            self.violations,
            self.max_optimal_residual,
            self.max_sign_residual,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for r in &self.worst {
            writeln!(f, "  t={} x={} y={} u={} residual={:e} region={}", r.t, r.x, r.y, r.u, r.residual, r.region)?;
        }
        Ok(())
    }
}

/// Settings of a certification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub fd_step: f64,
    pub tol: f64,
    pub exec: Exec,
    /// Keep every evaluation in the report (for CSV output).
    pub keep_rows: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { fd_step: 1e-5, tol: 1e-5, exec: Exec::default(), keep_rows: false }
    }
}

fn rk4_step(x: f64, y: f64, u: f64, gamma: f64, h: f64) -> (f64, f64) {
    let k1 = field(x, y, u, gamma);
    let k2 = field(x + 0.5 * h * k1.0, y + 0.5 * h * k1.1, u, gamma);
    let k3 = field(x + 0.5 * h * k2.0, y + 0.5 * h * k2.1, u, gamma);
    let k4 = field(x + h * k3.0, y + h * k3.1, u, gamma);
    (x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0), y + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1))
}

struct Point {
    value: f64,
    region: String,
    optimal: f64,
    controls: Vec<f64>,
}

fn push_unique(controls: &mut Vec<f64>, u: f64) {
    if !controls.contains(&u) {
        controls.push(u);
    }
}

fn point_data(problem: Problem, t: f64, x: f64, y: f64, bound: &CubicBound, n: usize) -> Result<Point> {
    match problem {
        Problem::FreeMax => {
            let optimal = optimal_u_free(t, x)?;
            let lo = x * x - 1.0;
            let mut controls: Vec<f64> =
                (0..n).map(|k| lo + (optimal - lo) * 2.0 * k as f64 / (n - 1) as f64).collect();
            push_unique(&mut controls, optimal);
            Ok(Point { value: bellman_free(t, x)?, region: "free".into(), optimal, controls })
        }
        Problem::BoundedMax | Problem::BoundedMin => {
            let (eval, optimal) = if problem == Problem::BoundedMax {
                (bellman_max(t, x, y, bound)?, optimal_control_max(t, x, y, bound)?)
            } else {
                (bellman_min(t, x, y, bound)?, optimal_control_min(t, x, y, bound)?)
            };
            let mut controls: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
            push_unique(&mut controls, optimal);
            Ok(Point { value: eval.value, region: eval.region.name().into(), optimal, controls })
        }
    }
}

fn value_at(problem: Problem, t: f64, x: f64, y: f64, bound: &CubicBound) -> Result<f64> {
    Ok(match problem {
        Problem::FreeMax => bellman_free(t, x)?,
        Problem::BoundedMax => bellman_max(t, x, y, bound)?.value,
        Problem::BoundedMin => bellman_min(t, x, y, bound)?.value,
    })
}

/// `d/dt B + L` along the constant-`u` flow through `(t, x, y)`.
fn residual(problem: Problem, t: f64, x: f64, y: f64, u: f64, bound: &CubicBound, h: f64) -> Result<f64> {
    match problem {
        Problem::FreeMax => {
            let fwd = bellman_free(t + h, (x + h * u).min(1.0))?;
            let bwd = bellman_free(t - h, (x - h * u).max(-1.0))?;
            Ok((fwd - bwd) / (2.0 * h) + (u - x * x + 1.0).max(0.0).sqrt())
        }
        _ => {
            let (xf, yf) = rk4_step(x, y, u, bound.gamma(), h);
            let (xb, yb) = rk4_step(x, y, u, bound.gamma(), -h);
            let fwd = value_at(problem, t + h, xf, yf, bound)?;
            let bwd = value_at(problem, t - h, xb, yb, bound)?;
            Ok((fwd - bwd) / (2.0 * h) + y)
        }
    }
}

fn check_state_row(
    problem: Problem,
    t: f64,
    (x, y): (f64, f64),
    bound: &CubicBound,
    grid: &VerificationGrid,
    opts: &VerifyOptions,
) -> VerificationReport {
    let mut rep = VerificationReport::empty(problem);
    let record = |rep: &mut VerificationReport, row: ResidualRow| {
        rep.checks += 1;
        if !row.pass {
            rep.violations += 1;
            rep.worst.push(row.clone());
        }
        if opts.keep_rows {
            rep.rows.push(row);
        }
    };
    let failed = |u: f64, e: Error| ResidualRow {
        t,
        x,
        y,
        u,
        residual: f64::NAN,
        region: format!("error: {e}"),
        pass: false,
        excess: f64::INFINITY,
    };
    let point = match point_data(problem, t, x, y, bound, grid.controls) {
        Ok(p) => p,
        Err(e) => {
            record(&mut rep, failed(f64::NAN, e));
            return rep;
        }
    };
    let scale = opts.tol * (1.0 + point.value.abs());
    for &u in &point.controls {
        let r = match residual(problem, t, x, y, u, bound, opts.fd_step) {
            Ok(r) => r,
            Err(e) => {
                record(&mut rep, failed(u, e));
                continue;
            }
        };
        let signed = if problem.is_max() { r } else { -r };
        rep.max_sign_residual = rep.max_sign_residual.max(signed);
        let mut excess = (signed - scale).max(0.0);
        if u == point.optimal {
            rep.max_optimal_residual = rep.max_optimal_residual.max(r.abs());
            excess = excess.max(r.abs() - opts.tol);
        }
        let pass = excess <= 0.0 && r.is_finite();
        record(
            &mut rep,
            ResidualRow { t, x, y, u, residual: r, region: point.region.clone(), pass, excess: excess.max(0.0) },
        );
    }
    rep
}

/// Check the dynamic-programming inequality at every grid state, time and
/// control sample, and equality under the optimal control.
pub fn verify_bellman(
    problem: Problem,
    bound: &CubicBound,
    grid: &VerificationGrid,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if !(1e-8..=1e-4).contains(&opts.fd_step) {
        return Err(Error::Domain(format!("finite-difference step {} outside [1e-8, 1e-4]", opts.fd_step)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if grid.times.iter().any(|&t| !(t + opts.fd_step <= 0.0)) {
        return Err(Error::Domain("time samples must stay at least one step below zero".into()));
    }
    let states = match problem {
        Problem::FreeMax => grid.free_states(),
        _ => grid.bounded_states(bound)?,
    };
    let jobs: Vec<(f64, &[(f64, f64)])> = grid
        .times
        .iter()
        .flat_map(|&t| states.chunks(grid.z_samples.len().max(1)).map(move |c| (t, c)))
        .collect();
    let parts = par::map(opts.exec, &jobs, |&(t, chunk)| {
        chunk
            .iter()
            .map(|&s| check_state_row(problem, t, s, bound, grid, opts))
            .fold(VerificationReport::empty(problem), VerificationReport::merge)
    });
    Ok(parts.into_iter().fold(VerificationReport::empty(problem), VerificationReport::merge))
}

/// Which pair of regional formulas meet at a seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seam {
    MaxFirstSwitch,
    MaxSlide,
    MaxSingular,
    MinSwitch,
}

impl Seam {
    pub const ALL: [Seam; 4] = [Seam::MaxFirstSwitch, Seam::MaxSlide, Seam::MaxSingular, Seam::MinSwitch];

    pub fn name(self) -> &'static str {
        match self {
            Seam::MaxFirstSwitch => "max I|II",
            Seam::MaxSlide => "max II|III",
            Seam::MaxSingular => "max III|IV",
            Seam::MinSwitch => "min I|II",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeamCheck {
    pub seam: Seam,
    pub samples: usize,
    /// Largest `|B_left - B_right| / (1 + |B|)`.
    pub max_jump: f64,
    /// Largest deviation of either side from the closed-form seam value.
    pub max_value_error: f64,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeamReport {
    pub checks: Vec<SeamCheck>,
    pub jump_tol: f64,
    pub value_tol: f64,
}

impl SeamReport {
    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.errors == 0 && c.max_jump < self.jump_tol && c.max_value_error < self.value_tol)
    }
}

impl fmt::Display for SeamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "seam={} samples={} max_jump={:e} max_value_error={:e} errors={}",
                c.seam.name(),
                c.samples,
                c.max_jump,
                c.max_value_error,
                c.errors
            )?;
        }
        Ok(())
    }
}

/// Time to go at which `seam` is crossed from `(x, y)`, with the two
/// regions meeting there and the closed-form common value.
fn seam_point(seam: Seam, x: f64, y: f64, mu: f64) -> Option<(f64, [Region; 2], f64)> {
    let q = AuxQuantities::new(x, y, mu);
    let m2 = mu * mu;
    let k = mu / (m2 + 1.0);
    let th = thresholds_unchecked(x, y, mu);
    match seam {
        Seam::MaxFirstSwitch => {
            let s = th.t_plus1.finite()?;
            Some((s, [Region::I, Region::II], k * ((m2 - 1.0) * q.c_plus / (2.0 * mu * q.a_minus)).ln()))
        }
        Seam::MaxSlide => {
            let s = th.t_hat.finite()?;
            Some((s, [Region::II, Region::III], k * (mu * q.c_plus / q.a_minus).ln()))
        }
        Seam::MaxSingular => {
            let s = th.t_star.finite()?;
            let v = 0.5 * ((mu - 1.0) * (y - x + 1.0) / ((mu + 1.0) * (y + x - 1.0))).ln()
                + k * (2.0 * m2 / (m2 - 1.0)).ln();
            Some((s, [Region::III, Region::IV], v))
        }
        Seam::MinSwitch => {
            let s = match th.t_minus1 {
                ExtReal::Finite(s) => s,
                ExtReal::PosInf => return None,
            };
            Some((s, [Region::I, Region::II], k * ((m2 - 1.0) * q.a_plus / (2.0 * mu * q.c_minus)).ln()))
        }
    }
}

/// Evaluate both regional formulas on `samples` random points of each seam.
pub fn seam_continuity(bound: &CubicBound, samples: usize, seed: u64, exec: Exec) -> Result<SeamReport> {
    if bound.is_degenerate() {
        return Err(Error::Domain("bounded problems need mu > 1".into()));
    }
    let mu = bound.mu();
    let checks = par::map(exec, &Seam::ALL, |&seam| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ seam as u64);
        let span = mu - 1.0 / mu;
        let mut check = SeamCheck { seam, samples: 0, max_jump: 0.0, max_value_error: 0.0, errors: 0 };
        let mut attempts = 0usize;
        while check.samples < samples && attempts < 1000 * samples.max(1) {
            attempts += 1;
            let (x, y) = from_wz(
                1.0 / mu + span * rng.random_range(0.001..0.999),
                1.0 / mu + span * rng.random_range(0.001..0.999),
            );
            let Some((s, regions, stated)) = seam_point(seam, x, y, mu) else { continue };
            if !(s > 0.0) {
                continue;
            }
            check.samples += 1;
            let eval = |r: Region| {
                if seam == Seam::MinSwitch {
                    min_region_formula(r, -s, x, y, mu)
                } else {
                    max_region_formula(r, -s, x, y, mu)
                }
            };
            match (eval(regions[0]), eval(regions[1])) {
                (Ok(a), Ok(b)) if a.value.is_finite() && b.value.is_finite() => {
                    let scale = 1.0 + a.value.abs().max(b.value.abs());
                    check.max_jump = check.max_jump.max((a.value - b.value).abs() / scale);
                    let err = (a.value - stated).abs().max((b.value - stated).abs()) / (1.0 + stated.abs());
                    check.max_value_error = check.max_value_error.max(err);
                }
                _ => check.errors += 1,
            }
        }
        check
    });
    Ok(SeamReport { checks, jump_tol: 1e-9, value_tol: 1e-10 })
}

/// Grid extremum of a value function together with the coarse cell width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridExtremum {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub cell: f64,
}

/// Extremize `B(-horizon, ., .)` over an `n x n` grid of the feasible square
/// in `(w, z)`, then over a second `n x n` grid spanning one coarse cell on
/// either side of the best node.
pub fn brute_force_extremum(
    problem: Problem,
    horizon: f64,
    bound: &CubicBound,
    n: usize,
    exec: Exec,
) -> Result<GridExtremum> {
    if problem == Problem::FreeMax {
        return Err(Error::Domain("grid extremization applies to the bounded problems".into()));
    }
    if n < 2 || !(horizon > 0.0) {
        return Err(Error::Domain(format!("need n >= 2 and a positive horizon, got n={n}, T={horizon}")));
    }
    if bound.is_degenerate() {
        return Err(Error::Domain("bounded problems need mu > 1".into()));
    }
    let mu = bound.mu();
    let sign = if problem.is_max() { 1.0 } else { -1.0 };
    let search = |w_lo: f64, w_hi: f64, z_lo: f64, z_hi: f64| -> Result<(f64, f64, f64)> {
        let rows = par::map_range(exec, n, |i| -> Result<(f64, f64, f64)> {
            let w = w_lo + (w_hi - w_lo) * i as f64 / (n - 1) as f64;
            let mut best = (f64::NEG_INFINITY, w, z_lo);
            for j in 0..n {
                let z = z_lo + (z_hi - z_lo) * j as f64 / (n - 1) as f64;
                let (x, y) = from_wz(w, z);
                let v = sign * value_at(problem, -horizon, x, y, bound)?;
                if v > best.0 {
                    best = (v, w, z);
                }
            }
            Ok(best)
        });
        let mut best = (f64::NEG_INFINITY, w_lo, z_lo);
        for r in rows {
            let r = r?;
            if r.0 > best.0 {
                best = r;
            }
        }
        Ok(best)
    };
    let (lo, hi) = (1.0 / mu, mu);
    let cell = (hi - lo) / (n - 1) as f64;
    let (_, w0, z0) = search(lo, hi, lo, hi)?;
    let (v, w, z) = search((w0 - cell).max(lo), (w0 + cell).min(hi), (z0 - cell).max(lo), (z0 + cell).min(hi))?;
    let (x, y) = from_wz(w, z);
    Ok(GridExtremum { x, y, value: sign * v, cell })
}

/// Outcome of comparing a closed-form extremizer with the grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumCheck {
    pub problem: Problem,
    pub horizon: f64,
    pub closed_form: (f64, f64, f64),
    pub grid: GridExtremum,
    pub value_error: f64,
    /// Distance between the two extremizers in `(w, z)`, in coarse cells.
    pub cells_apart: f64,
}

impl ExtremumCheck {
    pub fn passed(&self, value_tol: f64) -> bool {
        self.value_error < value_tol && self.cells_apart <= 1.0
    }
}

pub fn check_extremum(problem: Problem, horizon: f64, bound: &CubicBound, n: usize, exec: Exec) -> Result<ExtremumCheck> {
    let grid = brute_force_extremum(problem, horizon, bound, n, exec)?;
    let (x, y) = if problem.is_max() { argmax_point(horizon, bound.mu()) } else { argmin_point(horizon, bound.mu()) };
    let value = value_at(problem, -horizon, x, y, bound)?;
    let (w0, z0) = to_wz(x, y);
    let (w1, z1) = to_wz(grid.x, grid.y);
    let cells_apart = (w0 - w1).abs().max((z0 - z1).abs()) / grid.cell;
    Ok(ExtremumCheck {
        problem,
        horizon,
        closed_form: (x, y, value),
        grid,
        value_error: (value - grid.value).abs(),
        cells_apart,
    })
}

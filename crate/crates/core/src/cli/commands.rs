//! Implementations of the subcommands. Each writes a short `key=value`
//! report to the given stream and its data files to the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use super::config::{output_path, Resolver};
use super::{BoundArgs, ModeArg, Outcome, ProblemArg, SharpArg};
use crate::bellman::verify::{
    check_extremum, seam_continuity, verify_bellman, write_rows, Problem, VerificationGrid, VerifyOptions,
};
use crate::bellman::{bellman_max, bellman_min};
use crate::bounds::{bound_table, thm1_upper, thm2_upper, thm3_lower, upper_branch_point, BOUNDS_HEADER};
use crate::centroaffine::{
    check_admissible, feasibility_margin, riemann_length, CubicBound, ImmersionProfile, BOUNDARY_TOL,
};
use crate::control::synthesis::FREE_STOP;
use crate::control::trajectory::DEFAULT_STEP;
use crate::control::{profile_from_trajectory, synthesize_free, ControlState, Synthesizer, Trajectory};
use crate::error::{Error, Result};
use crate::par::Exec;

pub struct Context {
    pub resolver: Resolver,
    pub exec: Exec,
    pub out_dir: PathBuf,
}

impl Context {
    fn write_file<F>(&self, name: &Path, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = output_path(&self.out_dir, name);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
        let file = File::create(&path).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn pick_enum<T: ValueEnum + Clone>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.resolver.raw(key) {
            Some(text) => T::from_str(text, true).map_err(|e| Error::Parse(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Debug, Args, Clone, Default)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub bound: BoundArgs,
    /// Largest Hilbert distance in the table.
    #[arg(long)]
    pub dh_max: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file name (default bounds.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bounds<W: Write>(ctx: &Context, a: &BoundsArgs, out: &mut W) -> Result<Outcome> {
    let r = &ctx.resolver;
    let bound = r.bound(a.bound.gamma, a.bound.n)?;
    let dh_max = r.pick(a.dh_max, "dh_max", 5.0)?;
    let samples = r.pick(a.samples, "samples", 200usize)?;
    let rows = bound_table(dh_max, samples, &bound)?;
    let name = a.out.clone().unwrap_or_else(|| PathBuf::from("bounds.csv"));
    let path = ctx.write_file(&name, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(BOUNDS_HEADER).map_err(|e| Error::Io(e.to_string()))?;
        for row in &rows {
            csv.write_record(row.record().map(crate::fmt_f64)).map_err(|e| Error::Io(e.to_string()))?;
        }
        csv.flush().map_err(io_err)
    })?;
    writeln!(out, "bounds: rows={} gamma={} mu={} file={}", rows.len(), bound.gamma(), bound.mu(), path.display())
        .map_err(io_err)?;
    Ok(Outcome::Pass)
}

#[derive(Debug, Args, Clone, Default)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub bound: BoundArgs,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemArg>,
    /// States per axis of the (w, z) grid.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub times: Option<usize>,
    #[arg(long)]
    pub controls: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Points per seam in the continuity check.
    #[arg(long)]
    pub seam_samples: Option<usize>,
    /// Nodes per axis of the extremizer grid search.
    #[arg(long)]
    pub brute_grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write every residual to this CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Multiply mu by this factor, leaving gamma alone (negative control).
    #[arg(long)]
    pub debug_corrupt_mu: Option<f64>,
}

/// Horizons at which the closed-form extremizers are compared with the grid search.
const EXTREMUM_HORIZONS: [f64; 3] = [0.5, 2.0, 4.0];

/// Largest tolerated mismatch between gamma and mu.
const CONSISTENCY_TOL: f64 = 1e-12;

pub fn verify<W: Write>(ctx: &Context, a: &VerifyArgs, out: &mut W) -> Result<Outcome> {
    let r = &ctx.resolver;
    let mut bound = r.bound(a.bound.gamma, a.bound.n)?;
    if let Some(f) = a.debug_corrupt_mu {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Parse(format!("corruption factor must be positive, got {f}")));
        }
        bound = CubicBound::inconsistent(bound.gamma(), bound.mu() * f);
    }
    let problems: Vec<Problem> = match ctx.pick_enum(a.problem, "problem", ProblemArg::All)? {
        ProblemArg::FreeMax => vec![Problem::FreeMax],
        ProblemArg::BoundedMax => vec![Problem::BoundedMax],
        ProblemArg::BoundedMin => vec![Problem::BoundedMin],
        ProblemArg::All => Problem::ALL.to_vec(),
    };
    let bounded = problems.iter().any(|p| *p != Problem::FreeMax);
    if bounded && bound.is_degenerate() {
        return Err(Error::Domain("the bounded problems need gamma > 0".into()));
    }
    let n = r.pick(a.grid, "grid", 64usize)?;
    let times = r.pick(a.times, "times", 20usize)?;
    let controls = r.pick(a.controls, "controls", 9usize)?;
    let opts = VerifyOptions {
        fd_step: r.pick(a.fd_step, "fd_step", 1e-5)?,
        tol: r.pick(a.tol, "tol", 1e-5)?,
        exec: ctx.exec,
        keep_rows: a.csv.is_some(),
    };
    let seam_samples = r.pick(a.seam_samples, "seam_samples", 1000usize)?;
    let brute = r.pick(a.brute_grid, "brute_grid", 256usize)?;
    let seed = r.pick(a.seed, "seed", 1u64)?;
    let grid = VerificationGrid::interior(&bound, n, times, controls)?;

    let mut failures = 0usize;
    let w = |out: &mut W, s: String| writeln!(out, "{s}").map_err(io_err);
    w(out, format!("verify: gamma={} mu={} grid={n} times={times} controls={controls} tol={:e}", bound.gamma(), bound.mu(), opts.tol))?;
    if bounded {
        let err = bound.consistency_error();
        let ok = err < CONSISTENCY_TOL;
        failures += usize::from(!ok);
        w(out, format!("consistency: gamma_mu_error={err:e} status={}", status(ok)))?;
    }
    for &p in &problems {
        let rep = verify_bellman(p, &bound, &grid, &opts)?;
        failures += usize::from(!rep.passed());
        write!(out, "{rep}").map_err(io_err)?;
        if let Some(name) = &a.csv {
            let name = if problems.len() > 1 { suffixed(name, p.name()) } else { name.clone() };
            let path = ctx.write_file(&name, |f| write_rows(&rep.rows, f))?;
            w(out, format!("  residuals={}", path.display()))?;
        }
    }
    if bounded {
        let seams = seam_continuity(&bound, seam_samples, seed, ctx.exec)?;
        failures += usize::from(!seams.passed());
        write!(out, "{seams}").map_err(io_err)?;
        for &p in problems.iter().filter(|p| **p != Problem::FreeMax) {
            for horizon in EXTREMUM_HORIZONS {
                let c = check_extremum(p, horizon, &bound, brute, ctx.exec)?;
                let ok = c.passed(1e-6);
                failures += usize::from(!ok);
                w(
                    out,
                    format!(
                        "extremum: problem={p} T={horizon} closed_form={} grid={} value_error={:e} cells_apart={:.3} status={}",
                        c.closed_form.2,
                        c.grid.value,
                        c.value_error,
                        c.cells_apart,
                        status(ok)
                    ),
                )?;
            }
        }
    }
    w(out, format!("summary: failures={failures} status={}", status(failures == 0)))?;
    Ok(if failures == 0 { Outcome::Pass } else { Outcome::Fail })
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn suffixed(name: &Path, tag: &str) -> PathBuf {
    let stem = name.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = match name.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    name.with_file_name(file)
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub bound: BoundArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Horizon T.
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    /// Integration step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Output file name (default trajectory_<mode>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn mode_name(m: ModeArg) -> &'static str {
    match m {
        ModeArg::MaxFixed => "max-fixed",
        ModeArg::MaxFree => "max-free",
        ModeArg::MinFixed => "min-fixed",
        ModeArg::MinFree => "min-free",
    }
}

/// How much of a trajectory lies on the boundary of the feasible set.
fn boundary_contact(traj: &Trajectory, bound: &CubicBound) -> &'static str {
    let on = traj
        .samples()
        .iter()
        .filter(|s| feasibility_margin(s.x, s.y, bound.mu()).abs() <= 1e3 * BOUNDARY_TOL)
        .count();
    if on == traj.samples().len() {
        "all"
    } else if on == 0 {
        "none"
    } else {
        "partial"
    }
}

pub fn trajectory<W: Write>(ctx: &Context, a: &TrajectoryArgs, out: &mut W) -> Result<Outcome> {
    let r = &ctx.resolver;
    let bound = r.bound(a.bound.gamma, a.bound.n)?;
    let mode = ctx.pick_enum(a.mode, "mode", ModeArg::MaxFree)?;
    let horizon = r.pick(a.horizon, "horizon", 1.0)?;
    let step = r.pick(a.step, "step", DEFAULT_STEP)?;
    let synth = Synthesizer::new(step);
    let start = || -> Result<ControlState> {
        match (r.pick_opt(a.x0, "x0")?, r.pick_opt(a.y0, "y0")?) {
            (Some(x), Some(y)) => Ok(ControlState::new(x, y)),
            _ => Err(Error::Parse(format!("--x0 and --y0 are required in {} mode", mode_name(mode)))),
        }
    };
    let (traj, value) = match mode {
        ModeArg::MaxFixed => {
            let s0 = start()?;
            let traj = synth.max_fixed_start(s0, horizon, &bound)?;
            let v = if bound.is_degenerate() { horizon } else { bellman_max(-horizon, s0.x, s0.y, &bound)?.value };
            (traj, v)
        }
        ModeArg::MinFixed => {
            let s0 = start()?;
            let traj = synth.min_fixed_start(s0, horizon, &bound)?;
            let v = if bound.is_degenerate() { horizon } else { bellman_min(-horizon, s0.x, s0.y, &bound)?.value };
            (traj, v)
        }
        ModeArg::MaxFree => (synth.max_free(horizon, &bound)?, thm2_upper(horizon, &bound)?),
        ModeArg::MinFree => (synth.min_free(horizon, &bound)?, thm3_lower(horizon, &bound)?),
    };
    let name = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("trajectory_{}.csv", mode_name(mode))));
    let path = ctx.write_file(&name, |w| traj.write_csv(w))?;
    let cost = traj.running_cost();
    let mut lines = vec![
        format!("trajectory: mode={} gamma={} mu={} T={horizon}", mode_name(mode), bound.gamma(), bound.mu()),
        format!("arcs={} tags={}", traj.segments().len(), traj.tags().join(",")),
        format!("cost={cost} bellman={value} difference={:e}", cost - value),
        format!("boundary_contact={}", boundary_contact(&traj, &bound)),
    ];
    if matches!(mode, ModeArg::MaxFree | ModeArg::MinFree) {
        lines.push(format!("mirror_error={:e}", traj.mirror_error()));
    }
    if mode == ModeArg::MaxFree && !bound.is_degenerate() {
        let branch = upper_branch_point(&bound);
        let kind = if horizon <= branch { "two-arc" } else { "three-arc" };
        lines.push(format!("structure={kind} branch_point={branch}"));
    }
    lines.push(format!("file={}", path.display()));
    for l in lines {
        writeln!(out, "{l}").map_err(io_err)?;
    }
    Ok(Outcome::Pass)
}

#[derive(Debug, Args, Clone, Default)]
pub struct SharpnessArgs {
    #[command(flatten)]
    pub bound: BoundArgs,
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<f64>,
    /// Comma-separated smoothing widths.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub problem: Option<SharpArg>,
    /// Integration step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Output file name (default sharpness.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One smoothed profile measured against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessRow {
    pub problem: &'static str,
    pub epsilon: f64,
    pub length: f64,
    pub bound: f64,
    /// Distance to the bound on the admissible side; positive when strict.
    pub gap: f64,
    pub relative_gap: f64,
    /// Largest excess of `|C|` over the cubic bound along the profile.
    pub cubic_excess: f64,
    pub note: String,
}

pub const SHARPNESS_HEADER: [&str; 8] =
    ["problem", "epsilon", "length", "bound", "gap", "relative_gap", "cubic_excess", "note"];

/// Smoothed near-extremal profiles for each width in `epsilons`.
pub fn sharpness_rows(
    which: SharpArg,
    bound: &CubicBound,
    horizon: f64,
    epsilons: &[f64],
    step: f64,
) -> Result<Vec<SharpnessRow>> {
    for &e in epsilons {
        if !(e > 0.0 && e <= 0.1) {
            return Err(Error::Domain(format!("smoothing width must lie in (0, 0.1], got {e}")));
        }
    }
    let synth = Synthesizer::new(step);
    let mut rows = Vec::new();
    let kinds: &[&'static str] = match which {
        SharpArg::Max => &["max"],
        SharpArg::Min => &["min"],
        SharpArg::Free => &["free"],
        SharpArg::All => &["max", "min", "free"],
    };
    for &kind in kinds {
        let base = match kind {
            "max" => Some(synth.max_free(horizon, bound)?),
            "min" => Some(synth.min_free(horizon, bound)?),
            _ => None,
        };
        for &eps in epsilons {
            let measured = match (kind, &base) {
                ("free", _) => synthesize_free(horizon, 1.0 - eps, step).and_then(|t| {
                    let p = profile_from_trajectory(&t, 0.0, 0.0)?;
                    let (lo, hi) = p.domain();
                    Ok((riemann_length(&p, lo, hi)?, f64::NAN))
                }),
                (_, Some(traj)) => profile_from_trajectory(traj, 0.0, eps).and_then(|p| {
                    let (lo, hi) = p.domain();
                    let l = riemann_length(&p, lo, hi)?;
                    let excess = check_admissible(&p, bound, 1e-3)?.max_cubic_excess;
                    Ok((l, excess))
                }),
                _ => unreachable!("bounded kinds carry a base trajectory"),
            };
            let target = match kind {
                "max" => thm2_upper(horizon, bound)?,
                "min" => thm3_lower(horizon, bound)?,
                _ => thm1_upper(horizon - FREE_STOP)?,
            };
            let row = match measured {
                Ok((length, cubic_excess)) => {
                    let gap = if kind == "min" { length - target } else { target - length };
                    SharpnessRow {
                        problem: kind,
                        epsilon: eps,
                        length,
                        bound: target,
                        gap,
                        relative_gap: gap / target,
                        cubic_excess,
                        note: String::new(),
                    }
                }
                Err(e @ Error::Smoothing { .. }) => SharpnessRow {
                    problem: kind,
                    epsilon: eps,
                    length: f64::NAN,
                    bound: target,
                    gap: f64::NAN,
                    relative_gap: f64::NAN,
                    cubic_excess: f64::NAN,
                    note: format!("inconclusive: {e}"),
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Gaps must be strict and shrink with the smoothing width, unless the
/// bound is attained outright (`gamma = 0`, where the extremal is smooth).
pub fn sharpness_passes(rows: &[SharpnessRow], degenerate: bool) -> bool {
    let kinds = ["max", "min", "free"];
    kinds.iter().all(|k| {
        let mut rs: Vec<&SharpnessRow> = rows.iter().filter(|r| r.problem == *k).collect();
        rs.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let attained = degenerate && *k != "free";
        rs.iter().all(|r| r.note.is_empty() && r.gap.is_finite())
            && if attained {
                rs.iter().all(|r| r.relative_gap.abs() < 1e-9)
            } else {
                rs.iter().all(|r| r.gap > 0.0) && rs.windows(2).all(|w| w[1].gap < w[0].gap)
            }
    })
}

pub fn sharpness<W: Write>(ctx: &Context, a: &SharpnessArgs, out: &mut W) -> Result<Outcome> {
    let r = &ctx.resolver;
    let bound = r.bound(a.bound.gamma, a.bound.n)?;
    let horizon = r.pick(a.horizon, "horizon", 3.0)?;
    let epsilons = r.pick_list(a.epsilons.clone(), "epsilons", &[1e-2, 1e-3, 1e-4])?;
    let which = ctx.pick_enum(a.problem, "problem", SharpArg::All)?;
    let step = r.pick(a.step, "step", DEFAULT_STEP)?;
    let rows = sharpness_rows(which, &bound, horizon, &epsilons, step)?;
    let name = a.out.clone().unwrap_or_else(|| PathBuf::from("sharpness.csv"));
    let path = ctx.write_file(&name, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Io(e.to_string());
        csv.write_record(SHARPNESS_HEADER).map_err(err)?;
        for row in &rows {
            let nums = [row.epsilon, row.length, row.bound, row.gap, row.relative_gap, row.cubic_excess].map(crate::fmt_f64);
            let mut rec = vec![row.problem.to_string()];
            rec.extend(nums);
            rec.push(row.note.clone());
            csv.write_record(&rec).map_err(err)?;
        }
        csv.flush().map_err(io_err)
    })?;
    writeln!(out, "sharpness: gamma={} mu={} T={horizon}", bound.gamma(), bound.mu()).map_err(io_err)?;
    for row in &rows {
        writeln!(
            out,
            "problem={} epsilon={:e} length={} bound={} gap={:e} relative_gap={:e} cubic_excess={:e}{}",
            row.problem,
            row.epsilon,
            row.length,
            row.bound,
            row.gap,
            row.relative_gap,
            row.cubic_excess,
            if row.note.is_empty() { String::new() } else { format!(" note=\"{}\"", row.note) }
        )
        .map_err(io_err)?;
    }
    let ok = sharpness_passes(&rows, bound.is_degenerate());
    writeln!(out, "summary: status={} file={}", status(ok), path.display()).map_err(io_err)?;
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

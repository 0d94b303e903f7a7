//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hcl_core::bellman::verify::{
    check_extremum, seam_continuity, verify_bellman, Problem, VerificationGrid, VerifyOptions,
};
use hcl_core::bellman::{bellman_max, bellman_min, maximal_b, minimal_b};
use hcl_core::bounds::{delta, thm1_upper, thm2_relaxed, thm2_upper, thm3_lower, thm3_relaxed, thm4_geodesic_bounds};
use hcl_core::centroaffine::{feasibility_margin, CubicBound, Side};
use hcl_core::cli::commands::sharpness_rows;
use hcl_core::cli::SharpArg;
use hcl_core::control::random::{fuzz_bounded, fuzz_free};
use hcl_core::control::{
    dynamics, first_integral, ControlLaw, ControlState, Integrator, Synthesizer, System,
};
use hcl_core::par::Exec;

type Outcome = Result<String, String>;

const GAMMAS: [f64; 4] = [0.25, 0.5, 1.0, 1.5];

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bound(g: f64) -> Result<CubicBound, String> {
    CubicBound::from_gamma(g).map_err(|e| e.to_string())
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn bellman_certification() -> Outcome {
    let start = Instant::now();
    let opts = VerifyOptions { exec: Exec::Sequential, ..VerifyOptions::default() };
    let mut checks = 0;
    let mut worst = 0.0f64;
    for g in GAMMAS {
        let b = bound(g)?;
        let grid = VerificationGrid::interior(&b, 64, 20, 9).map_err(s)?;
        for p in Problem::ALL {
            let r = verify_bellman(p, &b, &grid, &opts).map_err(s)?;
            ensure(r.passed(), format!("gamma={g} {p}: {} violations", r.violations))?;
            checks += r.checks;
            worst = worst.max(r.max_optimal_residual);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s on one thread"))?;
    Ok(format!("{checks} checks, max optimal residual {worst:.2e}, {secs:.1} s sequential"))
}

fn seams() -> Outcome {
    let mut jump = 0.0f64;
    let mut value = 0.0f64;
    for g in GAMMAS {
        let r = seam_continuity(&bound(g)?, 1000, 7, Exec::Parallel).map_err(s)?;
        ensure(r.passed(), format!("gamma={g}:\n{r}"))?;
        for c in &r.checks {
            ensure(c.samples >= 1000, format!("gamma={g} {}: only {} samples", c.seam.name(), c.samples))?;
            jump = jump.max(c.max_jump);
            value = value.max(c.max_value_error);
        }
    }
    Ok(format!("max jump {jump:.1e}, max seam value error {value:.1e}"))
}

fn extremizers() -> Outcome {
    let b = bound(0.5)?;
    let mut err = 0.0f64;
    let mut apart = 0.0f64;
    for t in [0.5, 2.0, 4.0] {
        for p in [Problem::BoundedMax, Problem::BoundedMin] {
            let c = check_extremum(p, t, &b, 256, Exec::Parallel).map_err(s)?;
            ensure(c.passed(1e-6), format!("{p} T={t}: value error {:e}, {} cells apart", c.value_error, c.cells_apart))?;
            err = err.max(c.value_error);
            apart = apart.max(c.cells_apart);
        }
    }
    let mut closed = 0.0f64;
    for g in GAMMAS {
        let b = bound(g)?;
        for i in 1..=200 {
            let t = 0.05 * i as f64;
            let hi = maximal_b(t, &b).map_err(s)?.value;
            let lo = minimal_b(t, &b).map_err(s)?.value;
            let (u, l) = (thm2_upper(t, &b).map_err(s)?, thm3_lower(t, &b).map_err(s)?);
            let e = ((hi - u).abs() / u.max(1.0)).max((lo - l).abs() / l.max(1.0));
            ensure(e < 1e-12, format!("gamma={g} T={t}: extremal values off by {e:e}"))?;
            closed = closed.max(e);
        }
    }
    Ok(format!("grid value error {err:.1e}, {apart:.3} cells apart, closed forms agree to {closed:.1e}"))
}

fn trajectory_costs() -> Outcome {
    let b = bound(0.5)?;
    let synth = Synthesizer::default();
    let s0 = ControlState::new(0.0, 1.1);
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0, 4.0] {
        let pairs = [
            ("max-fixed", synth.max_fixed_start(s0, t, &b), bellman_max(-t, s0.x, s0.y, &b).map(|v| v.value)),
            ("min-fixed", synth.min_fixed_start(s0, t, &b), bellman_min(-t, s0.x, s0.y, &b).map(|v| v.value)),
            ("max-free", synth.max_free(t, &b), thm2_upper(t, &b)),
            ("min-free", synth.min_free(t, &b), thm3_lower(t, &b)),
        ];
        for (name, traj, value) in pairs {
            let diff = (traj.map_err(s)?.running_cost() - value.map_err(s)?).abs();
            ensure(diff < 1e-5, format!("{name} T={t}: cost off by {diff:e}"))?;
            worst = worst.max(diff);
        }
    }
    Ok(format!("largest cost/value difference {worst:.1e}"))
}

fn fuzzing() -> Outcome {
    let b = bound(0.5)?;
    let bounded = fuzz_bounded(&b, 1000, 1, (0.1, 5.0), Exec::Parallel);
    ensure(bounded.cases == 1000 && bounded.passed(), format!("bounded: {:?}", bounded.failures.first()))?;
    let free = fuzz_free(1000, 1, (0.1, 5.0), Exec::Parallel);
    ensure(free.cases == 1000 && free.passed(), format!("free: {:?}", free.failures.first()))?;
    Ok(format!(
        "2000 profiles, zero violations, tightest margins {:.1e} bounded and {:.1e} free",
        bounded.tightest_margin, free.tightest_margin
    ))
}

fn sharpness() -> Outcome {
    let b = bound(0.5)?;
    let rows = sharpness_rows(SharpArg::All, &b, 3.0, &[1e-3, 1e-4], 1e-4).map_err(s)?;
    let mut parts = Vec::new();
    for r in rows.iter().filter(|r| r.problem != "free") {
        let limit = if r.epsilon > 5e-4 { 1e-2 } else { 1e-3 };
        ensure(r.note.is_empty(), format!("{} eps={}: {}", r.problem, r.epsilon, r.note))?;
        ensure(r.gap > 0.0, format!("{} eps={}: gap {:e} is not strict", r.problem, r.epsilon, r.gap))?;
        ensure(
            r.relative_gap < limit,
            format!("{} eps={}: relative gap {:e} above {limit:e}", r.problem, r.epsilon, r.relative_gap),
        )?;
        parts.push(format!("{} {:e}: {:.2e}", r.problem, r.epsilon, r.relative_gap));
    }
    for r in rows.iter().filter(|r| r.problem == "free") {
        ensure(r.gap > 0.0, format!("free eps={}: gap {:e}", r.epsilon, r.gap))?;
    }
    Ok(parts.join(", "))
}

fn constants() -> Outcome {
    let tail = thm1_upper(20.0).map_err(s)? - 20.0;
    ensure((tail - 2f64.ln()).abs() < 1e-6, format!("thm1 tail {tail}"))?;
    for g in GAMMAS {
        let b = bound(g)?;
        let mut prev = delta(1e-3, &b).map_err(s)?;
        for i in 2..=10_000 {
            let cur = delta(1e-3 * i as f64, &b).map_err(s)?;
            ensure(cur > prev, format!("gamma={g}: delta not increasing at T={}", 1e-3 * i as f64))?;
            prev = cur;
        }
    }
    let mut round = 0.0f64;
    for i in 0..=300 {
        let g = 0.01 * i as f64;
        let back = CubicBound::from_mu(bound(g)?.mu()).map_err(s)?.gamma();
        round = round.max((back - g).abs());
    }
    ensure(round < 1e-14, format!("mu/gamma roundtrip error {round:e}"))?;
    let flat = bound(0.0)?;
    for i in 0..=50 {
        let d = 0.2 * i as f64;
        let (lo, hi) = thm4_geodesic_bounds(d, &flat).map_err(s)?;
        let all = [
            thm2_upper(d, &flat),
            thm2_relaxed(d, &flat),
            thm3_lower(d, &flat),
            thm3_relaxed(d, &flat),
            Ok(lo),
            Ok(hi),
        ];
        for v in all {
            let v = v.map_err(s)?;
            ensure((v - d).abs() <= 1e-12 * d.max(1.0), format!("gamma=0 bound {v} differs from d={d}"))?;
        }
    }
    Ok(format!("tail - ln 2 = {:.1e}, roundtrip {round:.1e}", tail - 2f64.ln()))
}

fn conservation() -> Outcome {
    let b = bound(0.5)?;
    let mu = b.mu();
    // starts on invariant lines through saddles so the flow stays bounded
    let starts = [(-1.0, 0.1, 0.9 * mu), (0.0, -0.05, 1.05), (1.0, -0.2, 1.2 / mu)];
    let mut drift = 0.0f64;
    for (u, x0, y0) in starts {
        let s0 = ControlState::new(x0, y0);
        let tr = Integrator::new(1e-4)
            .integrate(System::Bounded(b), s0, ControlLaw::Constant(u), 0.0, 2.0)
            .map_err(s)?;
        let i0 = first_integral(s0, u, &b).map_err(s)?;
        for p in tr.samples() {
            let i = first_integral(ControlState::new(p.x, p.y), u, &b).map_err(s)?;
            drift = drift.max((i - i0).abs());
        }
    }
    ensure(drift < 1e-8, format!("first integral drifted by {drift:e}"))?;
    let mut rest = 0.0f64;
    for g in GAMMAS {
        let b = bound(g)?;
        for (corner, u) in [(b.right_corner(), -1.0), (b.left_corner(), 1.0)] {
            let (dx, dy) = dynamics(ControlState::new(corner.0, corner.1), u, &b).map_err(s)?;
            rest = rest.max(dx.hypot(dy));
        }
    }
    ensure(rest < 1e-14, format!("corner velocity {rest:e}"))?;
    Ok(format!("drift {drift:.1e}, corner velocity {rest:.1e}"))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, String> {
        let mut r = csv::Reader::from_path(path).map_err(s)?;
        let header = r.headers().map_err(s)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(s))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, String> {
        self.header.iter().position(|h| h == name).ok_or_else(|| format!("missing column {name}"))
    }

    fn num(&self, name: &str) -> Result<Vec<f64>, String> {
        let c = self.col(name)?;
        self.rows.iter().map(|r| r[c].parse::<f64>().map_err(s)).collect()
    }

    /// Run-length encoded arc tags.
    fn arcs(&self) -> Result<Vec<String>, String> {
        let c = self.col("region")?;
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r[c]) {
                out.push(r[c].clone());
            }
        }
        Ok(out)
    }
}

fn hcl(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hcl"))
        .args(args)
        .env("HCL_OUT_DIR", dir)
        .output()
        .map_err(s)?;
    ensure(out.status.success(), format!("hcl {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))?;
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn interp(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let i = ts.partition_point(|&s| s < t).clamp(1, ts.len() - 1);
    let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    vs[i - 1] + w * (vs[i] - vs[i - 1])
}

/// Largest violation of `x(t) = -x(-T - t)`, `y(t) = y(-T - t)`.
fn mirror_from_csv(t: &Table) -> Result<f64, String> {
    let (ts, xs, ys) = (t.num("t")?, t.num("x")?, t.num("y")?);
    let (a, b) = (ts[0], ts[ts.len() - 1]);
    let mut worst = 0.0f64;
    for (i, &ti) in ts.iter().enumerate() {
        let m = a + b - ti;
        worst = worst.max((xs[i] + interp(&ts, &xs, m)).abs()).max((ys[i] - interp(&ts, &ys, m)).abs());
    }
    Ok(worst)
}

fn contact(t: &Table, mu: f64) -> Result<(usize, usize), String> {
    let (xs, ys) = (t.num("x")?, t.num("y")?);
    let on = xs.iter().zip(&ys).filter(|(x, y)| feasibility_margin(**x, **y, mu).abs() < 1e-9).count();
    Ok((on, xs.len()))
}

fn figure_bounds(dir: &Path) -> Result<(), String> {
    let mut tables = Vec::new();
    for g in ["0.25", "0.5", "1"] {
        hcl(dir, &["bounds", "--gamma", g, "--dh-max", "6", "--samples", "121", "--out", &format!("b{g}.csv")])?;
        tables.push(Table::read(&dir.join(format!("b{g}.csv")))?);
    }
    for t in &tables {
        let cols: Vec<Vec<f64>> = ["dH", "thm1_upper", "thm2_upper", "thm2_relaxed", "thm3_lower", "thm3_relaxed"]
            .iter()
            .map(|c| t.num(c))
            .collect::<Result<_, _>>()?;
        for i in 1..cols[0].len() {
            let [d, t1, t2, t2r, t3, t3r] = [0, 1, 2, 3, 4, 5].map(|k| cols[k][i]);
            ensure(t3 < d && d < t2, format!("ordering around dH={d}"))?;
            ensure(t2 <= t1 * (1.0 + 1e-12), format!("thm2 above thm1 at dH={d}"))?;
            ensure(t2r >= t2 && t3r <= t3, format!("relaxed bounds inside exact ones at dH={d}"))?;
        }
    }
    let upper: Vec<Vec<f64>> = tables.iter().map(|t| t.num("thm2_upper")).collect::<Result<_, _>>()?;
    let lower: Vec<Vec<f64>> = tables.iter().map(|t| t.num("thm3_lower")).collect::<Result<_, _>>()?;
    for i in 1..upper[0].len() {
        ensure(upper[0][i] < upper[1][i] && upper[1][i] < upper[2][i], "upper bound not increasing in gamma")?;
        ensure(lower[0][i] > lower[1][i] && lower[1][i] > lower[2][i], "lower bound not decreasing in gamma")?;
    }
    Ok(())
}

fn figure_sides() -> Result<(), String> {
    let b = bound(0.5)?;
    let mu = b.mu();
    for side in Side::ALL {
        let x0 = if matches!(side, Side::UpperLeft | Side::LowerLeft) { -0.1 } else { 0.1 };
        let s0 = ControlState::new(x0, side.y_at(x0, mu));
        let law = ControlLaw::Constant(side.sliding_control());
        let tr = Integrator::new(1e-4).integrate(System::Bounded(b), s0, law, 0.0, 0.2).map_err(s)?;
        for p in tr.samples() {
            let off = side.slack(p.x, p.y, mu).abs();
            ensure(off < 1e-9, format!("{} leaves its side by {off:e}", side.name()))?;
        }
    }
    Ok(())
}

fn figure_syntheses(dir: &Path) -> Result<(), String> {
    let mu = bound(0.5)?.mu();
    let run = |mode: &str, t: &str, name: &str, start: bool| -> Result<Table, String> {
        let mut args = vec!["trajectory", "--gamma", "0.5", "--mode", mode, "-T", t, "--out", name];
        if start {
            args.extend(["--x0", "0", "--y0", "1.1"]);
        }
        hcl(dir, &args)?;
        Table::read(&dir.join(name))
    };
    let expected = [
        ("0.05", vec!["const(+1)"]),
        ("0.5", vec!["const(+1)", "slide(upper-right)"]),
        ("1", vec!["const(+1)", "const(0)", "slide(upper-right)"]),
        ("2", vec!["const(-1)", "const(0)", "slide(upper-right)"]),
    ];
    for (t, arcs) in expected {
        let tab = run("max-fixed", t, &format!("fixed_max_{t}.csv"), true)?;
        ensure(tab.arcs()? == arcs, format!("max-fixed T={t}: arcs {:?}", tab.arcs()?))?;
    }
    let expected_min = [("0.1", vec!["const(-1)"]), ("3", vec!["const(-1)", "slide(lower-left)"])];
    for (t, arcs) in expected_min {
        let tab = run("min-fixed", t, &format!("fixed_min_{t}.csv"), true)?;
        ensure(tab.arcs()? == arcs, format!("min-fixed T={t}: arcs {:?}", tab.arcs()?))?;
    }
    // the free maximizer switches from two to three arcs at the branch point (1.4166 for gamma = 0.5)
    for (t, n, full) in [("1", 2, true), ("3", 3, false)] {
        let tab = run("max-free", t, &format!("free_max_{t}.csv"), false)?;
        let arcs = tab.arcs()?;
        ensure(arcs.len() == n, format!("max-free T={t}: arcs {arcs:?}"))?;
        let (on, all) = contact(&tab, mu)?;
        ensure(if full { on == all } else { on > 0 && on < all }, format!("max-free T={t}: {on}/{all} on the boundary"))?;
        if !full {
            ensure(arcs[1] == "const(0)", format!("max-free T={t}: middle arc {}", arcs[1]))?;
        }
        let m = mirror_from_csv(&tab)?;
        ensure(m < 1e-6, format!("max-free T={t}: mirror error {m:e}"))?;
    }
    for t in ["1", "3"] {
        let tab = run("min-free", t, &format!("free_min_{t}.csv"), false)?;
        let arcs = tab.arcs()?;
        ensure(arcs.len() == 2, format!("min-free T={t}: arcs {arcs:?}"))?;
        let (on, all) = contact(&tab, mu)?;
        ensure(on == all, format!("min-free T={t}: {on}/{all} on the boundary"))?;
        let m = mirror_from_csv(&tab)?;
        ensure(m < 1e-6, format!("min-free T={t}: mirror error {m:e}"))?;
    }
    Ok(())
}

fn figures() -> Outcome {
    let dir = tempfile::tempdir().map_err(s)?;
    figure_bounds(dir.path()).map_err(|e| format!("bounds: {e}"))?;
    figure_sides().map_err(|e| format!("sides: {e}"))?;
    figure_syntheses(dir.path()).map_err(|e| format!("trajectories: {e}"))?;
    Ok("bound ordering, side flows, arc structure, boundary contact and symmetry".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Bellman certification", bellman_certification),
        ("seam continuity", seams),
        ("extremizer agreement", extremizers),
        ("trajectory costs", trajectory_costs),
        ("bound fuzzing", fuzzing),
        ("sharpness", sharpness),
        ("analytic constants", constants),
        ("conservation", conservation),
        ("figure structure", figures),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Centro-affine metric, cubic form and length of planar curves
//! `t -> e^{alpha(t)} (e^t, e^-t)`, plus the state-space constraint set they induce.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};
use crate::quad::adaptive_simpson;

/// Below this the bound is treated as the quadric case `mu = 1`.
pub const DEGENERATE_MU: f64 = 1.0 + 1e-12;

/// Classification tolerance for [`state_bounds_check`].
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A bound `|C| <= 2 gamma h^{3/2}` on the cubic form together with the
/// equivalent state-constraint constant `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBound {
    gamma: f64,
    mu: f64,
}

pub fn mu_from_gamma(gamma: f64) -> Result<CubicBound> {
    CubicBound::from_gamma(gamma)
}

impl CubicBound {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        ensure_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return Err(Error::Domain(format!("gamma must be nonnegative, got {gamma}")));
        }
        let half = 0.5 * gamma;
        Ok(Self { gamma, mu: half + (1.0 + half * half).sqrt() })
    }

    pub fn from_mu(mu: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        if mu < 1.0 {
            return Err(Error::Domain(format!("mu must be at least 1, got {mu}")));
        }
        Ok(Self { gamma: (mu * mu - 1.0) / mu, mu })
    }

    /// Bound satisfied by the Blaschke metric of an n-dimensional domain: `mu = sqrt(n)`.
    pub fn blaschke(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        let nf = n as f64;
        Ok(Self { gamma: (nf - 1.0) / nf.sqrt(), mu: nf.sqrt() })
    }

    /// A pair that deliberately breaks the gamma/mu relation. Only useful as a
    /// negative control for the verification harness.
    pub fn inconsistent(gamma: f64, mu: f64) -> Self {
        Self { gamma, mu }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_degenerate(&self) -> bool {
        self.mu <= DEGENERATE_MU
    }

    /// Discrepancy between the stored mu and the one implied by gamma.
    pub fn consistency_error(&self) -> f64 {
        let half = 0.5 * self.gamma;
        (self.mu - (half + (1.0 + half * half).sqrt())).abs()
    }

    /// `mu^{-1}` and `mu` bounds of the `(w, z)` coordinates.
    pub fn wz_range(&self) -> (f64, f64) {
        (1.0 / self.mu, self.mu)
    }

    /// The right corner of the feasible set; the left one is its mirror image.
    pub fn right_corner(&self) -> (f64, f64) {
        let m2 = self.mu * self.mu;
        ((m2 - 1.0) / (m2 + 1.0), 2.0 * self.mu / (m2 + 1.0))
    }

    pub fn left_corner(&self) -> (f64, f64) {
        let (x, y) = self.right_corner();
        (-x, y)
    }
}

/// One of the four straight sides of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `y = mu (1 + x)`
    UpperLeft,
    /// `y = mu (1 - x)`
    UpperRight,
    /// `y = (1 - x) / mu`
    LowerLeft,
    /// `y = (1 + x) / mu`
    LowerRight,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::UpperLeft, Side::UpperRight, Side::LowerLeft, Side::LowerRight];

    /// The `y` coordinate of the side's line at abscissa `x`.
    pub fn y_at(self, x: f64, mu: f64) -> f64 {
        match self {
            Side::UpperLeft => mu * (1.0 + x),
            Side::UpperRight => mu * (1.0 - x),
            Side::LowerLeft => (1.0 - x) / mu,
            Side::LowerRight => (1.0 + x) / mu,
        }
    }

    /// Signed distance in `y` to the side, positive on the feasible side.
    pub fn slack(self, x: f64, y: f64, mu: f64) -> f64 {
        match self {
            Side::UpperLeft | Side::UpperRight => self.y_at(x, mu) - y,
            Side::LowerLeft | Side::LowerRight => y - self.y_at(x, mu),
        }
    }

    /// The only control that keeps a trajectory on this side.
    pub fn sliding_control(self) -> f64 {
        match self {
            Side::UpperLeft | Side::LowerLeft => 1.0,
            Side::UpperRight | Side::LowerRight => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::UpperLeft => "upper-left",
            Side::UpperRight => "upper-right",
            Side::LowerLeft => "lower-left",
            Side::LowerRight => "lower-right",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Side::UpperLeft => 1,
            Side::UpperRight => 2,
            Side::LowerLeft => 4,
            Side::LowerRight => 8,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of active sides; two sides are active at the four vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SideSet(u8);

impl SideSet {
    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    fn insert(&mut self, side: Side) {
        self.0 |= side.bit();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Inside,
    OnBoundary(SideSet),
    Outside,
}

/// Classify `(x, y)` against `(1 + |x|)/mu <= y <= mu (1 - |x|)`.
pub fn state_bounds_check(x: f64, y: f64, bound: &CubicBound) -> StateClass {
    classify_with_tol(x, y, bound.mu(), BOUNDARY_TOL)
}

pub(crate) fn classify_with_tol(x: f64, y: f64, mu: f64, tol: f64) -> StateClass {
    let mut active = SideSet::default();
    for side in Side::ALL {
        let s = side.slack(x, y, mu);
        if !(s >= -tol) {
            return StateClass::Outside;
        }
        if s <= tol {
            active.insert(side);
        }
    }
    if active.is_empty() {
        StateClass::Inside
    } else {
        StateClass::OnBoundary(active)
    }
}

/// Smallest of the four side slacks; negative outside the feasible set.
pub fn feasibility_margin(x: f64, y: f64, mu: f64) -> f64 {
    Side::ALL.iter().map(|s| s.slack(x, y, mu)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    C2,
    C3,
    PiecewiseAnalytic,
}

impl Smoothness {
    pub fn name(self) -> &'static str {
        match self {
            Smoothness::C2 => "C2",
            Smoothness::C3 => "C3",
            Smoothness::PiecewiseAnalytic => "piecewise-analytic",
        }
    }
}

/// `alpha` and its first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub fn metric(&self) -> f64 {
        self.d2 - self.d1 * self.d1 + 1.0
    }

    pub fn cubic(&self) -> f64 {
        let a = self.d1;
        self.d3 - 6.0 * a * self.d2 + 4.0 * a * a * a - 4.0 * a
    }
}

/// The log-scale function `alpha` of a curve, queryable with derivatives.
pub trait ImmersionProfile: Send + Sync {
    fn domain(&self) -> (f64, f64);

    fn smoothness(&self) -> Smoothness;

    /// Jet at `t`; fails outside the domain.
    fn jet(&self, t: f64) -> Result<Jet>;

    /// Points where the third derivative may jump.
    fn corners(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Points that split the domain into pieces on which the profile is
    /// smooth. Quadrature never straddles one of these.
    fn breakpoints(&self) -> Vec<f64> {
        self.corners()
    }
}

fn check_domain<P: ImmersionProfile + ?Sized>(p: &P, t: f64) -> Result<()> {
    let (lo, hi) = p.domain();
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if !(t >= lo - slack && t <= hi + slack) {
        return Err(Error::Domain(format!("t = {t} outside profile domain [{lo}, {hi}]")));
    }
    Ok(())
}

pub fn metric_h<P: ImmersionProfile + ?Sized>(profile: &P, t: f64) -> Result<f64> {
    check_domain(profile, t)?;
    Ok(profile.jet(t)?.metric())
}

pub fn cubic_form<P: ImmersionProfile + ?Sized>(profile: &P, t: f64) -> Result<f64> {
    check_domain(profile, t)?;
    if profile.smoothness() != Smoothness::C3 {
        let near = profile.corners().iter().any(|c| (c - t).abs() <= 1e-12 * (1.0 + t.abs()));
        if near {
            return Err(Error::CubicFormUndefined { t });
        }
    }
    Ok(profile.jet(t)?.cubic())
}

/// Default absolute tolerance of [`riemann_length`].
pub const LENGTH_TOL: f64 = 1e-10;

/// Length of `[t_i, t_f]` in the centro-affine metric.
pub fn riemann_length<P: ImmersionProfile + ?Sized>(profile: &P, t_i: f64, t_f: f64) -> Result<f64> {
    riemann_length_tol(profile, t_i, t_f, LENGTH_TOL)
}

pub fn riemann_length_tol<P: ImmersionProfile + ?Sized>(
    profile: &P,
    t_i: f64,
    t_f: f64,
    tol: f64,
) -> Result<f64> {
    check_domain(profile, t_i)?;
    check_domain(profile, t_f)?;
    if !(t_i < t_f) {
        return Err(Error::Domain(format!("need t_i < t_f, got [{t_i}, {t_f}]")));
    }
    let mut cuts = vec![t_i];
    let mut inner: Vec<f64> = profile.breakpoints().into_iter().filter(|b| *b > t_i && *b < t_f).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(t_f);
    let total = t_f - t_i;
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let piece_tol = tol * (w[1] - w[0]) / total;
        sum += adaptive_simpson(
            |t| {
                let h = profile.jet(t)?.metric();
                if h > 0.0 {
                    Ok(h.sqrt())
                } else {
                    Err(Error::Inadmissible { t, h })
                }
            },
            w[0],
            w[1],
            piece_tol,
        )?;
    }
    Ok(sum)
}

/// Closed-form profile given by a jet function.
#[derive(Clone)]
pub struct AnalyticProfile {
    domain: (f64, f64),
    smoothness: Smoothness,
    jet: Arc<dyn Fn(f64) -> Jet + Send + Sync>,
}

impl fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticProfile")
            .field("domain", &self.domain)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl AnalyticProfile {
    pub fn new<F>(domain: (f64, f64), smoothness: Smoothness, jet: F) -> Result<Self>
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        if !(domain.0 < domain.1) {
            return Err(Error::Domain(format!("empty profile domain {domain:?}")));
        }
        Ok(Self { domain, smoothness, jet: Arc::new(jet) })
    }

    /// `alpha` constant: the hyperbola `xy = e^{2 alpha}`.
    pub fn hyperbola(alpha0: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(domain, Smoothness::C3, move |_| Jet { alpha: alpha0, d1: 0.0, d2: 0.0, d3: 0.0 })
    }

    /// `alpha = amplitude * cos t`.
    pub fn cosine(amplitude: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(domain, Smoothness::C3, move |t| {
            let (s, c) = t.sin_cos();
            Jet { alpha: amplitude * c, d1: -amplitude * s, d2: -amplitude * c, d3: amplitude * s }
        })
    }
}

impl ImmersionProfile for AnalyticProfile {
    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn jet(&self, t: f64) -> Result<Jet> {
        check_domain(self, t)?;
        Ok((self.jet)(t))
    }
}

/// A tabulated profile. Between samples every jet component is interpolated
/// linearly, so the result is only as good as the sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    ts: Vec<f64>,
    jets: Vec<Jet>,
    smoothness: Smoothness,
}

pub const PROFILE_HEADER: [&str; 5] = ["t", "alpha", "dalpha", "ddalpha", "dddalpha"];

impl SampledProfile {
    pub fn new(ts: Vec<f64>, jets: Vec<Jet>, smoothness: Smoothness) -> Result<Self> {
        if ts.len() < 2 || ts.len() != jets.len() {
            return Err(Error::Domain("sampled profile needs at least two matching samples".into()));
        }
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("sample times must be strictly increasing".into()));
        }
        Ok(Self { ts, jets, smoothness })
    }

    /// Tabulate another profile at the given times.
    pub fn tabulate<P: ImmersionProfile + ?Sized>(profile: &P, ts: &[f64]) -> Result<Self> {
        let jets = ts.iter().map(|t| profile.jet(*t)).collect::<Result<Vec<_>>>()?;
        Self::new(ts.to_vec(), jets, profile.smoothness())
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(PROFILE_HEADER).map_err(io)?;
        for (t, j) in self.ts.iter().zip(&self.jets) {
            w.write_record([t, &j.alpha, &j.d1, &j.d2, &j.d3].map(|v| crate::fmt_f64(*v)))
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, smoothness: Smoothness) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().ne(PROFILE_HEADER.iter().copied()) {
            return Err(Error::Parse(format!("unexpected profile header {headers:?}")));
        }
        let (mut ts, mut jets) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let v = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            ts.push(v[0]);
            jets.push(Jet { alpha: v[1], d1: v[2], d2: v[3], d3: v[4] });
        }
        Self::new(ts, jets, smoothness)
    }
}

impl ImmersionProfile for SampledProfile {
    fn domain(&self) -> (f64, f64) {
        (self.ts[0], self.ts[self.ts.len() - 1])
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn jet(&self, t: f64) -> Result<Jet> {
        check_domain(self, t)?;
        let k = self.ts.partition_point(|s| *s <= t).clamp(1, self.ts.len() - 1);
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (self.jets[k - 1], self.jets[k]);
        let lerp = |p: f64, q: f64| p + s * (q - p);
        Ok(Jet { alpha: lerp(a.alpha, b.alpha), d1: lerp(a.d1, b.d1), d2: lerp(a.d2, b.d2), d3: lerp(a.d3, b.d3) })
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.ts[1..self.ts.len() - 1].to_vec()
    }
}

/// Violations found by [`check_admissible`], each recorded by its sample time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmissibilityReport {
    pub samples: usize,
    pub nonpositive_metric: Vec<f64>,
    pub slope_violations: Vec<f64>,
    pub cubic_violations: Vec<f64>,
    /// Largest `|C| - 2 gamma h^{3/2}` seen, 0 when the bound holds everywhere.
    pub max_cubic_excess: f64,
    pub state_violations: Vec<f64>,
    pub skipped_corners: usize,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.nonpositive_metric.is_empty() && self.slope_violations.is_empty() && self.cubic_violations.is_empty()
    }

    pub fn within_state_bounds(&self) -> bool {
        self.state_violations.is_empty()
    }
}

/// Relative slack allowed when comparing `|C|` against its bound; extremal
/// profiles attain equality.
pub const CUBIC_REL_TOL: f64 = 1e-9;
/// Slack allowed for the state bounds of sampled trajectories.
pub const STATE_TOL: f64 = 1e-9;

/// Sample the profile on a uniform grid and record every violation.
pub fn check_admissible<P: ImmersionProfile + ?Sized>(
    profile: &P,
    bound: &CubicBound,
    grid_step: f64,
) -> Result<AdmissibilityReport> {
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::Domain(format!("grid step must be positive, got {grid_step}")));
    }
    let (lo, hi) = profile.domain();
    let n = ((hi - lo) / grid_step).ceil().max(1.0) as usize;
    let mut rep = AdmissibilityReport { samples: n + 1, ..Default::default() };
    for i in 0..=n {
        let t = if i == n { hi } else { lo + i as f64 * grid_step };
        let j = profile.jet(t)?;
        let h = j.metric();
        if !(h > 0.0) {
            rep.nonpositive_metric.push(t);
        }
        if !(j.d1.abs() < 1.0) {
            rep.slope_violations.push(t);
        }
        if h > 0.0 {
            let y = h.sqrt();
            if feasibility_margin(j.d1, y, bound.mu()) < -STATE_TOL {
                rep.state_violations.push(t);
            }
            match cubic_form(profile, t) {
                Ok(c) => {
                    let cap = 2.0 * bound.gamma() * h * y;
                    let excess = c.abs() - cap;
                    if excess > 0.0 {
                        rep.max_cubic_excess = rep.max_cubic_excess.max(excess);
                    }
                    if excess > CUBIC_REL_TOL * cap + 1e-12 {
                        rep.cubic_violations.push(t);
                    }
                }
                Err(Error::CubicFormUndefined { .. }) => rep.skipped_corners += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rep)
}

//! Seeds and predictor-corrector continuation of zero-splitting curves.
//!
//! The root function is the signed splitting, which changes sign across a
//! zero-splitting curve. Curves are traced on any [`SplittingField`], so the
//! same machinery runs on flow-derived fields and on analytic test fields.

use crate::flows::{DomainBox, FlowSystem, TimeEpoch};
use crate::foliations::{angle_field, foliation_sample, AngleField, GridSpec};
use crate::{Error, Result, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::io::Write;

/// A scalar field whose zero set is traced.
pub trait SplittingField: Sync {
    /// Signed splitting at `z`, `None` where undefined.
    fn signed(&self, z: Vec2) -> Option<f64>;

    fn domain(&self) -> DomainBox;

    fn periodic_x(&self) -> bool {
        false
    }

    fn epoch(&self) -> Option<TimeEpoch> {
        None
    }
}

/// Signed splitting of a flow's foliations over one epoch.
#[derive(Debug, Clone)]
pub struct FlowSplittingField {
    pub system: FlowSystem,
    pub epoch: TimeEpoch,
    pub step: f64,
}

impl SplittingField for FlowSplittingField {
    fn signed(&self, z: Vec2) -> Option<f64> {
        foliation_sample(&self.system, z, &self.epoch, self.step).ok().and_then(|s| s.signed)
    }

    fn domain(&self) -> DomainBox {
        self.system.domain()
    }

    fn periodic_x(&self) -> bool {
        self.system.periodic_x()
    }

    fn epoch(&self) -> Option<TimeEpoch> {
        Some(self.epoch)
    }
}

/// A closed-form field, for tests and synthetic experiments.
pub struct AnalyticField<F> {
    pub f: F,
    pub domain: DomainBox,
}

impl<F: Fn(Vec2) -> f64 + Sync> SplittingField for AnalyticField<F> {
    fn signed(&self, z: Vec2) -> Option<f64> {
        let v = (self.f)(z);
        v.is_finite().then_some(v)
    }

    fn domain(&self) -> DomainBox {
        self.domain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    /// Rough seed threshold on θ.
    pub eps1: f64,
    /// Corrector and refinement tolerance on |signed|.
    pub eps2: f64,
    /// Role reversal when the denominator partial falls below this fraction
    /// of the gradient norm (or below the other partial).
    pub eps3: f64,
    /// Predictor step.
    pub h: f64,
    /// Finite-difference step for the partials.
    pub h_fd: f64,
    pub max_steps: usize,
    /// Largest endpoint gap bridged by [`connect_gaps`].
    pub l_max: f64,
    pub closure_tol: f64,
    pub seed_dedupe_radius: f64,
    /// Extra uniformly random seed candidates.
    pub n_random: usize,
    pub rng_seed: u64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let h = 1e-3;
        ContinuationConfig {
            eps1: 1e-2,
            eps2: 1e-10,
            eps3: 1e-3,
            h,
            h_fd: 1e-5,
            max_steps: 20_000,
            l_max: 10.0 * h,
            closure_tol: 2.0 * h,
            seed_dedupe_radius: 4.0 * h,
            n_random: 0,
            rng_seed: 0,
        }
    }
}

impl ContinuationConfig {
    /// Defaults with `h` a quarter of the finer grid spacing and `h_fd`
    /// scaled to the size of the grid box.
    pub fn for_grid(grid: &GridSpec) -> Self {
        let scale = grid.bbox.width().max(grid.bbox.height());
        ContinuationConfig { h_fd: 1e-5 * scale, ..Self::with_step(0.25 * grid.dx().min(grid.dy())) }
    }

    /// Defaults with the step-dependent tolerances scaled to `h`.
    pub fn with_step(h: f64) -> Self {
        ContinuationConfig {
            h,
            l_max: 10.0 * h,
            closure_tol: 2.0 * h,
            seed_dedupe_radius: 4.0 * h,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("h", self.h),
            ("h_fd", self.h_fd),
            ("l_max", self.l_max),
            ("closure_tol", self.closure_tol),
            ("seed_dedupe_radius", self.seed_dedupe_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("continuation.{name} must be positive, got {v}")));
            }
        }
        if self.eps2 >= self.eps1 {
            return Err(Error::Config(format!("continuation needs eps2 < eps1, got {} ≥ {}", self.eps2, self.eps1)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("continuation.max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Closed,
    DomainExit,
    CorrectorFailure,
    MaxSteps,
    Revisit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCurve {
    pub vertices: Vec<Vec2>,
    /// |signed splitting| at each vertex.
    pub residuals: Vec<f64>,
    pub closed: bool,
    /// `Closed` for loops, otherwise the forward branch's stop reason.
    pub termination: Termination,
    /// Stop reasons of the forward and backward branches.
    pub branch_terminations: [Termination; 2],
    /// Vertices at which the independent coordinate switched.
    pub role_reversals: Vec<usize>,
    /// Indices `k` where the segment `k → k+1` was inserted by gap connection.
    pub gap_segments: Vec<usize>,
    pub epoch: Option<TimeEpoch>,
}

impl ZeroCurve {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Closed loops are candidates for coherent-structure boundaries.
    pub fn is_coherent_candidate(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

fn periodic_delta(a: Vec2, b: Vec2, period: Option<f64>) -> Vec2 {
    let mut d = b - a;
    if let Some(w) = period {
        d.x -= w * (d.x / w).round();
    }
    d
}

fn period_of(field: &dyn SplittingField) -> Option<f64> {
    field.periodic_x().then(|| field.domain().width())
}

/// Uniform-cell hash of tagged points; x may be periodic.
struct SpatialHash<T> {
    cell: f64,
    period: Option<f64>,
    cells: HashMap<(i64, i64), Vec<(Vec2, T)>>,
}

impl<T: Copy> SpatialHash<T> {
    fn new(cell: f64, period: Option<f64>) -> Self {
        SpatialHash { cell, period, cells: HashMap::new() }
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        let x = match self.period {
            Some(w) => p.x.rem_euclid(w),
            None => p.x,
        };
        ((x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Vec2, tag: T) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push((p, tag));
    }

    /// All entries within `r` of `p`.
    fn near(&self, p: Vec2, r: f64) -> impl Iterator<Item = (f64, T)> + '_ {
        let (ki, kj) = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        let n_wrap = self.period.map(|w| (w / self.cell).ceil() as i64);
        let mut keys = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                let mut i = ki + di;
                if let Some(n) = n_wrap {
                    i = i.rem_euclid(n.max(1));
                }
                keys.push((i, kj + dj));
            }
        }
        keys.sort_unstable();
        keys.dedup();
        let period = self.period;
        keys.into_iter().filter_map(move |k| self.cells.get(&k)).flatten().filter_map(move |(q, tag)| {
            let d = periodic_delta(p, *q, period).norm();
            (d <= r).then_some((d, *tag))
        })
    }
}

/// Central-difference partials of the signed splitting.
pub fn theta_partials(field: &dyn SplittingField, z: Vec2, h_fd: f64) -> Result<(f64, f64)> {
    let eval = |p: Vec2| field.signed(p).ok_or(Error::PartialsUnavailable { x: z.x, y: z.y });
    let dx = (eval(z + Vec2::new(h_fd, 0.0))? - eval(z - Vec2::new(h_fd, 0.0))?) / (2.0 * h_fd);
    let dy = (eval(z + Vec2::new(0.0, h_fd))? - eval(z - Vec2::new(0.0, h_fd))?) / (2.0 * h_fd);
    if !(dx.is_finite() && dy.is_finite()) {
        return Err(Error::PartialsUnavailable { x: z.x, y: z.y });
    }
    Ok((dx, dy))
}

/// Grid nodes with θ below `eps1`, smallest θ first, thinned so that no two
/// seeds lie within `seed_dedupe_radius`.
pub fn seed_search(field: &AngleField, cfg: &ContinuationConfig) -> Vec<Vec2> {
    let candidates: Vec<(f64, Vec2)> =
        field.samples.iter().filter_map(|s| s.theta.filter(|&t| t < cfg.eps1).map(|t| (t, s.z))).collect();
    dedupe_seeds(candidates, cfg.seed_dedupe_radius, None)
}

/// Uniform random candidates in the field's domain with θ below `eps1`.
pub fn random_seeds(field: &dyn SplittingField, cfg: &ContinuationConfig) -> Vec<(f64, Vec2)> {
    let d = field.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let points: Vec<Vec2> = (0..cfg.n_random)
        .map(|_| Vec2::new(rng.random_range(d.x_min..=d.x_max), rng.random_range(d.y_min..=d.y_max)))
        .collect();
    points
        .into_iter()
        .filter_map(|z| {
            let theta = field.signed(z)?.abs().min(1.0).asin();
            (theta < cfg.eps1).then_some((theta, z))
        })
        .collect()
}

fn dedupe_seeds(mut candidates: Vec<(f64, Vec2)>, radius: f64, period: Option<f64>) -> Vec<Vec2> {
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.x.total_cmp(&b.1.x)).then(a.1.y.total_cmp(&b.1.y)));
    let mut hash = SpatialHash::new(radius, period);
    let mut out = Vec::new();
    for (_, z) in candidates {
        if hash.near(z, radius).next().is_none() {
            hash.insert(z, ());
            out.push(z);
        }
    }
    out
}

/// Drive `|signed|` below `eps2` from a rough seed by a trust-region dogleg
/// iteration on the one-residual least-squares problem.
pub fn refine_root(field: &dyn SplittingField, z0: Vec2, cfg: &ContinuationConfig) -> Result<Vec2> {
    let max_disp = 10.0 * cfg.h;
    let fail = |msg: String| Error::Refinement(format!("seed ({}, {}): {msg}", z0.x, z0.y));
    let mut z = z0;
    let mut r = field.signed(z).ok_or_else(|| fail("undefined splitting at seed".into()))?;
    let mut radius = cfg.h;
    for _ in 0..50 {
        if r.abs() < cfg.eps2 {
            return Ok(z);
        }
        let (gx, gy) = theta_partials(field, z, cfg.h_fd)?;
        let g = Vec2::new(gx, gy);
        let gg = g.norm_sq();
        if gg == 0.0 {
            return Err(fail("vanishing gradient".into()));
        }
        let step = dogleg_step(r, g, radius);
        let predicted = r * r - (r + g.dot(step)).powi(2);
        let trial = z + step;
        let accepted = match field.signed(trial) {
            Some(rt) if periodic_delta(z0, trial, period_of(field)).norm() <= max_disp => {
                let rho = if predicted > 0.0 { (r * r - rt * rt) / predicted } else { 0.0 };
                if rho > 0.75 && step.norm() > 0.99 * radius {
                    radius = (2.0 * radius).min(max_disp);
                } else if rho < 0.25 {
                    radius *= 0.25;
                }
                (rho > 1e-4).then_some(rt)
            }
            _ => {
                radius *= 0.25;
                None
            }
        };
        if let Some(rt) = accepted {
            z = trial;
            r = rt;
        }
        if radius < 1e-14 * (1.0 + z.norm()) {
            break;
        }
    }
    if r.abs() < cfg.eps2 {
        Ok(z)
    } else {
        Err(fail(format!("|signed| = {:e} after 50 iterations", r.abs())))
    }
}

/// Dogleg step for the model `r + g·p` within radius `delta`. With one
/// residual the Jacobian `gᵀ` has rank one and the Gauss-Newton step is the
/// minimum-norm pseudo-inverse solution.
pub fn dogleg_step(r: f64, g: Vec2, delta: f64) -> Vec2 {
    let gg = g.norm_sq();
    let p_gn = g * (-r / gg);
    if p_gn.norm() <= delta {
        return p_gn;
    }
    // Cauchy point of the model along -∇(½r²) = -r·g.
    let grad = g * r;
    let jg = g.dot(grad);
    let p_c = grad * (-grad.norm_sq() / (jg * jg));
    if p_c.norm() >= delta {
        return grad * (-delta / grad.norm());
    }
    // Segment from the Cauchy point towards the Gauss-Newton point.
    let d = p_gn - p_c;
    let (a, b, c) = (d.norm_sq(), 2.0 * p_c.dot(d), p_c.norm_sq() - delta * delta);
    let tau = if a > 0.0 { (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a) } else { 0.0 };
    p_c + d * tau.clamp(0.0, 1.0)
}

/// Root of a scalar function on `[lo, hi]` starting from `s0` with slope
/// estimate `d0`: secant steps until a sign change is found, then Illinois
/// regula falsi with bisection safeguards.
pub fn solve_1d(g: impl Fn(f64) -> Option<f64>, s0: f64, d0: f64, lo: f64, hi: f64, tol: f64) -> Option<(f64, f64)> {
    let (mut a, mut fa) = (s0, g(s0)?);
    if fa.abs() < tol {
        return Some((a, fa));
    }
    if d0 == 0.0 || !d0.is_finite() {
        return None;
    }
    let (mut b, mut fb) = {
        let s = (a - fa / d0).clamp(lo, hi);
        (s, g(s)?)
    };
    let mut iters = 0;
    while fa.signum() == fb.signum() {
        if fb.abs() < tol {
            return Some((b, fb));
        }
        iters += 1;
        if iters > 12 || fb == fa {
            return None;
        }
        let s = (b - fb * (b - a) / (fb - fa)).clamp(lo, hi);
        if s == b {
            return None;
        }
        a = b;
        fa = fb;
        b = s;
        fb = g(s)?;
    }
    if fb.abs() < tol {
        return Some((b, fb));
    }
    let mut side = 0i8;
    for k in 0..200 {
        let width = (b - a).abs();
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            return None;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        let (l, u) = if a < b { (a, b) } else { (b, a) };
        if !(c > l && c < u) || k % 8 == 7 {
            c = 0.5 * (a + b);
        }
        let fc = g(c)?;
        if fc.abs() < tol {
            return Some((c, fc));
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    None
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// x advances, y is solved for (dy/dx = -θx/θy).
    FreeX,
    /// y advances, x is solved for (dx/dy = -θy/θx).
    FreeY,
}

struct Branch {
    points: Vec<Vec2>,
    residuals: Vec<f64>,
    reversals: Vec<usize>,
    termination: Termination,
}

/// Vertex tags in the revisit hash: (curve id, signed arc position).
type Tag = (usize, f64);

struct Tracer<'a> {
    field: &'a dyn SplittingField,
    cfg: &'a ContinuationConfig,
    period: Option<f64>,
}

impl Tracer<'_> {
    fn outside(&self, p: Vec2) -> bool {
        let d = self.field.domain();
        let x_out = self.period.is_none() && (p.x < d.x_min || p.x > d.x_max);
        x_out || p.y < d.y_min || p.y > d.y_max
    }

    fn correct(&self, pred: Vec2, mode: Mode, grad: Vec2, h: f64) -> Option<(Vec2, f64)> {
        let tol = self.cfg.eps2;
        match mode {
            Mode::FreeX => {
                let (s, f) = solve_1d(
                    |y| self.field.signed(Vec2::new(pred.x, y)),
                    pred.y,
                    grad.y,
                    pred.y - 2.0 * h,
                    pred.y + 2.0 * h,
                    tol,
                )?;
                Some((Vec2::new(pred.x, s), f))
            }
            Mode::FreeY => {
                let (s, f) = solve_1d(
                    |x| self.field.signed(Vec2::new(x, pred.y)),
                    pred.x,
                    grad.x,
                    pred.x - 2.0 * h,
                    pred.x + 2.0 * h,
                    tol,
                )?;
                Some((Vec2::new(s, pred.y), f))
            }
        }
    }

    /// One branch from `seed`, leaving in direction `dir0`. `sign` orders arc
    /// positions (+1 forward, -1 backward) for the revisit hash.
    #[allow(clippy::too_many_arguments)]
    fn trace(
        &self,
        seed: Vec2,
        seed_grad: Vec2,
        dir0: Vec2,
        curve_id: usize,
        sign: f64,
        hash: &mut SpatialHash<Tag>,
        budget: &mut usize,
        other_end: Option<Vec2>,
    ) -> Branch {
        let cfg = self.cfg;
        let mut br = Branch {
            points: Vec::new(),
            residuals: Vec::new(),
            reversals: Vec::new(),
            termination: Termination::MaxSteps,
        };
        let mut z = seed;
        let mut grad = seed_grad;
        let mut tangent = dir0;
        let mut arc = 0.0;
        let mut mode = if grad.y.abs() >= grad.x.abs() { Mode::FreeX } else { Mode::FreeY };
        let mut h = cfg.h;
        let mut prev_seg: Option<Vec2> = None;
        while *budget > 0 {
            // Tangent of the zero set, oriented to continue the previous direction.
            let mut t = grad.perp().normalized();
            if t.dot(tangent) < 0.0 {
                t = -t;
            }
            let (num, den) = match mode {
                Mode::FreeX => (grad.x.abs(), grad.y.abs()),
                Mode::FreeY => (grad.y.abs(), grad.x.abs()),
            };
            if den < (cfg.eps3 * grad.norm()).max(num) {
                mode = if mode == Mode::FreeX { Mode::FreeY } else { Mode::FreeX };
                br.reversals.push(br.points.len());
            }
            let mut accepted = None;
            while h >= cfg.h / 16.0 * (1.0 - 1e-12) {
                let pred = z + t * h;
                if let Some((p, f)) = self.correct(pred, mode, grad, h) {
                    let seg = periodic_delta(z, p, self.period);
                    let len = seg.norm();
                    let turn_ok = prev_seg.map_or(true, |s: Vec2| s.cross(seg).atan2(s.dot(seg)).abs() < FRAC_PI_4);
                    if len > 0.0 && len <= 2.0 * cfg.h && turn_ok {
                        accepted = Some((p, f, seg));
                        break;
                    }
                }
                h *= 0.5;
            }
            let Some((p, f, seg)) = accepted else {
                br.termination = Termination::CorrectorFailure;
                break;
            };
            if self.outside(p) {
                br.termination = Termination::DomainExit;
                break;
            }
            *budget -= 1;
            arc += seg.norm();
            // Closure or revisit against all vertices traced so far.
            let tol = cfg.closure_tol;
            let steps = br.points.len() + 1;
            let near = |q: Vec2| periodic_delta(p, q, self.period).norm() <= tol;
            let mut hit = None;
            if steps >= 10 && (near(seed) || other_end.is_some_and(near)) {
                hit = Some(Termination::Closed);
            } else {
                // Vertices close to the seed in arc length are left for the closure test.
                let revisit = hash.near(p, tol).any(|(_, (cid, pos))| {
                    cid != curve_id || ((sign * arc - pos).abs() > 3.0 * tol && pos.abs() > 3.0 * tol)
                });
                if revisit {
                    hit = Some(Termination::Revisit);
                }
            }
            br.points.push(p);
            br.residuals.push(f.abs());
            hash.insert(p, (curve_id, sign * arc));
            if let Some(term) = hit {
                br.termination = term;
                break;
            }
            prev_seg = Some(seg);
            tangent = seg.normalized();
            z = p;
            h = (2.0 * h).min(cfg.h);
            match theta_partials(self.field, z, cfg.h_fd) {
                Ok((gx, gy)) if gx != 0.0 || gy != 0.0 => grad = Vec2::new(gx, gy),
                _ => {
                    br.termination = Termination::CorrectorFailure;
                    break;
                }
            }
        }
        br
    }
}

fn trace_with_hash(
    field: &dyn SplittingField,
    seed: Vec2,
    cfg: &ContinuationConfig,
    curve_id: usize,
    hash: &mut SpatialHash<Tag>,
) -> Result<ZeroCurve> {
    let r0 = field.signed(seed).ok_or(Error::PartialsUnavailable { x: seed.x, y: seed.y })?;
    if r0.abs() >= cfg.eps2 {
        return Err(Error::Refinement(format!("seed residual {:e} is not below eps2", r0.abs())));
    }
    let (gx, gy) = theta_partials(field, seed, cfg.h_fd)?;
    let grad = Vec2::new(gx, gy);
    if grad.norm_sq() == 0.0 {
        return Err(Error::PartialsUnavailable { x: seed.x, y: seed.y });
    }
    let tracer = Tracer { field, cfg, period: period_of(field) };
    hash.insert(seed, (curve_id, 0.0));
    let mut budget = cfg.max_steps;
    let dir = grad.perp().normalized();
    let fwd = tracer.trace(seed, grad, dir, curve_id, 1.0, hash, &mut budget, None);
    let bwd = if fwd.termination == Termination::Closed {
        Branch { points: vec![], residuals: vec![], reversals: vec![], termination: Termination::Closed }
    } else {
        let end = fwd.points.last().copied();
        tracer.trace(seed, grad, -dir, curve_id, -1.0, hash, &mut budget, end)
    };
    let closed = fwd.termination == Termination::Closed || bwd.termination == Termination::Closed;
    let nb = bwd.points.len();
    let mut vertices: Vec<Vec2> = bwd.points.iter().rev().copied().collect();
    let mut residuals: Vec<f64> = bwd.residuals.iter().rev().copied().collect();
    vertices.push(seed);
    residuals.push(r0.abs());
    vertices.extend(&fwd.points);
    residuals.extend(&fwd.residuals);
    let mut role_reversals: Vec<usize> = bwd.reversals.iter().map(|&k| nb - k).collect();
    role_reversals.extend(fwd.reversals.iter().map(|&k| nb + k));
    role_reversals.sort_unstable();
    role_reversals.dedup();
    Ok(ZeroCurve {
        vertices,
        residuals,
        closed,
        termination: if closed { Termination::Closed } else { fwd.termination },
        branch_terminations: [fwd.termination, bwd.termination],
        role_reversals,
        gap_segments: vec![],
        epoch: field.epoch(),
    })
}

/// Trace the zero-splitting curve through `seed` in both directions.
pub fn continue_curve(field: &dyn SplittingField, seed: Vec2, cfg: &ContinuationConfig) -> Result<ZeroCurve> {
    cfg.validate()?;
    let mut hash = SpatialHash::new(cfg.closure_tol, period_of(field));
    trace_with_hash(field, seed, cfg, 0, &mut hash)
}

/// Join endpoints closer than `l_max`, nearest pairs first. A curve whose two
/// ends meet becomes closed.
pub fn connect_gaps(curves: Vec<ZeroCurve>, cfg: &ContinuationConfig, period: Option<f64>) -> Vec<ZeroCurve> {
    let mut curves = curves;
    loop {
        let mut best: Option<(f64, usize, bool, usize, bool)> = None;
        for i in 0..curves.len() {
            if curves[i].closed || curves[i].vertices.len() < 2 {
                continue;
            }
            let ends_i = [(false, curves[i].vertices[0]), (true, *curves[i].vertices.last().unwrap())];
            // own ends
            if curves[i].vertices.len() >= 3 {
                let d = periodic_delta(ends_i[0].1, ends_i[1].1, period).norm();
                if d < cfg.l_max && best.map_or(true, |b| d < b.0) {
                    best = Some((d, i, true, i, false));
                }
            }
            for (j, cj) in curves.iter().enumerate().skip(i + 1) {
                if cj.closed || cj.vertices.len() < 2 {
                    continue;
                }
                let ends_j = [(false, cj.vertices[0]), (true, *cj.vertices.last().unwrap())];
                for &(ei, pi) in &ends_i {
                    for &(ej, pj) in &ends_j {
                        let d = periodic_delta(pi, pj, period).norm();
                        if d < cfg.l_max && best.map_or(true, |b| d < b.0) {
                            best = Some((d, i, ei, j, ej));
                        }
                    }
                }
            }
        }
        let Some((_, i, ei, j, ej)) = best else { break };
        if i == j {
            let c = &mut curves[i];
            c.gap_segments.push(c.vertices.len() - 1);
            c.closed = true;
            c.termination = Termination::Closed;
            continue;
        }
        let cj = curves.remove(j);
        let ci = curves.remove(i);
        // Orient ci to end at the joined endpoint and cj to start there.
        let ci = if ei { ci } else { reversed(ci) };
        let cj = if ej { reversed(cj) } else { cj };
        let offset = ci.vertices.len();
        let mut joined = ci;
        joined.gap_segments.push(offset - 1);
        joined.gap_segments.extend(cj.gap_segments.iter().map(|k| k + offset));
        joined.role_reversals.extend(cj.role_reversals.iter().map(|k| k + offset));
        joined.vertices.extend(cj.vertices);
        joined.residuals.extend(cj.residuals);
        joined.branch_terminations = [joined.branch_terminations[0], cj.branch_terminations[1]];
        curves.insert(i, joined);
    }
    curves
}

fn reversed(mut c: ZeroCurve) -> ZeroCurve {
    let n = c.vertices.len();
    c.vertices.reverse();
    c.residuals.reverse();
    c.role_reversals = c.role_reversals.iter().rev().map(|k| n - 1 - k).collect();
    c.gap_segments = c.gap_segments.iter().rev().map(|k| n - 2 - k).collect();
    c.branch_terminations.swap(0, 1);
    c
}

/// Per-seed outcome of the pipeline.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ZeroCurveReport {
    pub candidates: usize,
    pub seeds: usize,
    pub skipped_near_curve: usize,
    pub refinement_failures: usize,
    pub trace_failures: usize,
}

/// Trace curves from candidate seeds on an arbitrary field.
pub fn trace_from_seeds(
    field: &dyn SplittingField,
    seeds: &[Vec2],
    cfg: &ContinuationConfig,
) -> Result<(Vec<ZeroCurve>, ZeroCurveReport)> {
    cfg.validate()?;
    let period = period_of(field);
    let mut hash = SpatialHash::new(cfg.closure_tol.max(cfg.seed_dedupe_radius), period);
    let mut curves = Vec::new();
    let mut report = ZeroCurveReport { seeds: seeds.len(), ..Default::default() };
    let near_curve = |hash: &SpatialHash<Tag>, z: Vec2| hash.near(z, cfg.seed_dedupe_radius).next().is_some();
    for &seed in seeds {
        if near_curve(&hash, seed) {
            report.skipped_near_curve += 1;
            continue;
        }
        let root = match refine_root(field, seed, cfg) {
            Ok(r) => r,
            Err(e) => {
                log::debug!("{e}");
                report.refinement_failures += 1;
                continue;
            }
        };
        if near_curve(&hash, root) {
            report.skipped_near_curve += 1;
            continue;
        }
        match trace_with_hash(field, root, cfg, curves.len(), &mut hash) {
            Ok(c) => curves.push(c),
            Err(e) => {
                log::debug!("trace from ({}, {}) failed: {e}", root.x, root.y);
                report.trace_failures += 1;
            }
        }
    }
    Ok((connect_gaps(curves, cfg, period), report))
}

/// Seeds from a precomputed angle field plus optional random candidates.
pub fn seeds_for(field: &dyn SplittingField, angles: &AngleField, cfg: &ContinuationConfig) -> (usize, Vec<Vec2>) {
    let mut candidates: Vec<(f64, Vec2)> =
        angles.samples.iter().filter_map(|s| s.theta.filter(|&t| t < cfg.eps1).map(|t| (t, s.z))).collect();
    candidates.extend(random_seeds(field, cfg));
    let n = candidates.len();
    (n, dedupe_seeds(candidates, cfg.seed_dedupe_radius, period_of(field)))
}

/// Zero curves from an existing angle field, reusing its foliation samples.
pub fn zero_curves_from_field(
    system: &FlowSystem,
    angles: &AngleField,
    cfg: &ContinuationConfig,
) -> Result<(Vec<ZeroCurve>, ZeroCurveReport)> {
    let field = FlowSplittingField { system: system.clone(), epoch: angles.epoch, step: angles.step };
    let (n, seeds) = seeds_for(&field, angles, cfg);
    let (curves, mut report) = trace_from_seeds(&field, &seeds, cfg)?;
    report.candidates = n;
    Ok((curves, report))
}

/// Full pipeline: angle field, seeds, refinement, continuation, gap joining.
pub fn find_zero_curves(
    system: &FlowSystem,
    epoch: &TimeEpoch,
    grid: &GridSpec,
    step: f64,
    cfg: &ContinuationConfig,
) -> Result<(Vec<ZeroCurve>, ZeroCurveReport)> {
    cfg.validate()?;
    let angles = angle_field(system, grid, epoch, step)?;
    zero_curves_from_field(system, &angles, cfg)
}

/// Recompute |signed| at every vertex; returns the largest value (infinite
/// if any vertex is undefined).
pub fn verify_residuals(field: &dyn SplittingField, curves: &[ZeroCurve]) -> f64 {
    curves
        .iter()
        .flat_map(|c| c.vertices.iter())
        .map(|&z| field.signed(z).map_or(f64::INFINITY, f64::abs))
        .fold(0.0, f64::max)
}

/// Flat CSV (`curve, vertex, x, y, residual`) with a `# {json}` header line.
pub fn write_curves_csv<W: Write>(mut out: W, curves: &[ZeroCurve], header: &serde_json::Value) -> Result<()> {
    writeln!(out, "# {header}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "vertex", "x", "y", "residual"])?;
    for (ci, c) in curves.iter().enumerate() {
        for (vi, (p, r)) in c.vertices.iter().zip(&c.residuals).enumerate() {
            w.write_record([ci.to_string(), vi.to_string(), p.x.to_string(), p.y.to_string(), r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

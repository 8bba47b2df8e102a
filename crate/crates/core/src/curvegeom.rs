//! Planar curves, discrete curvature, Frenet-Serret reconstruction and the
//! closed-form curvature evolution of the linear model flows.

use crate::flows::{flow_map_unwrapped, FlowSystem, LinearCase, SystemId};
use crate::{Error, Mat2, Result, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Polyline with cumulative arc length. Closed curves carry an implicit
/// segment from the last vertex back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarCurve {
    vertices: Vec<Vec2>,
    closed: bool,
    arc: Vec<f64>,
    length: f64,
}

impl PlanarCurve {
    /// Repeated consecutive vertices are dropped, as is a closing duplicate
    /// of the first vertex on closed curves.
    pub fn new(vertices: Vec<Vec2>, closed: bool) -> Result<Self> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateCurve("non-finite vertex".into()));
        }
        let mut vs: Vec<Vec2> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if vs.last() != Some(&v) {
                vs.push(v);
            }
        }
        if closed && vs.len() > 1 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 2 {
            return Err(Error::DegenerateCurve(format!("{} distinct vertices", vs.len())));
        }
        let mut arc = Vec::with_capacity(vs.len());
        let mut s = 0.0;
        arc.push(0.0);
        for w in vs.windows(2) {
            s += w[0].dist(w[1]);
            arc.push(s);
        }
        let length = if closed { s + vs[vs.len() - 1].dist(vs[0]) } else { s };
        Ok(PlanarCurve { vertices: vs, closed, arc, length })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Arc length at each vertex, starting at 0.
    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    /// Total length, including the closing segment of a closed curve.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        PlanarCurve::new(self.vertices.iter().map(|&v| f(v)).collect(), self.closed)
    }

    /// Signed shoelace area (positive for counter-clockwise loops).
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n).map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n])).sum::<f64>()
    }

    /// Area centroid of a closed curve (vertex mean if the area vanishes).
    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let a = self.signed_area();
        if a.abs() < 1e-300 {
            let sum = self.vertices.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
            return sum * (1.0 / n as f64);
        }
        let mut c = Vec2::ZERO;
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            c += (p + q) * p.cross(q);
        }
        c * (1.0 / (6.0 * a))
    }

    /// Point at arc length `s` (wrapped for closed curves, clamped otherwise).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = if self.closed { s.rem_euclid(self.length) } else { s.clamp(0.0, self.length) };
        let k = self.arc.partition_point(|&a| a <= s).saturating_sub(1);
        let n = self.vertices.len();
        let (a, b) = if k + 1 < n {
            (k, k + 1)
        } else if self.closed {
            (n - 1, 0)
        } else {
            return self.vertices[n - 1];
        };
        let seg_end = if b == 0 { self.length } else { self.arc[b] };
        let span = seg_end - self.arc[a];
        let t = if span > 0.0 { (s - self.arc[a]) / span } else { 0.0 };
        self.vertices[a].lerp(self.vertices[b], t)
    }

    /// CSV `s, x, y` with a `# {json}` header line.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &serde_json::Value) -> Result<()> {
        writeln!(out, "# {header}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "x", "y"])?;
        for (s, v) in self.arc.iter().zip(&self.vertices) {
            w.write_record([s.to_string(), v.x.to_string(), v.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a curve from CSV with `x` and `y` columns; `#` lines are skipped.
    /// Closure comes from a `"closed"` key in the JSON header when present,
    /// otherwise from `closed_default`.
    pub fn read_csv<R: BufRead>(input: R, closed_default: bool) -> Result<Self> {
        let mut closed = closed_default;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Ok(serde_json::Value::Object(m)) = serde_json::from_str::<serde_json::Value>(rest.trim()) {
                    if let Some(c) = m.get("closed").and_then(|v| v.as_bool()) {
                        closed = c;
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Format(format!("curve file has no '{name}' column")))
        };
        let (ix, iy) = (col("x")?, col("y")?);
        let mut vs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad number in curve file row {:?}", rec.position())))
            };
            vs.push(Vec2::new(parse(ix)?, parse(iy)?));
        }
        PlanarCurve::new(vs, closed)
    }
}

/// Linear-interpolation resampling to `n` points at uniform arc spacing.
/// Closed curves get `n` points over the full loop (spacing `L/n`), open
/// curves include both ends (spacing `L/(n-1)`).
pub fn resample_arclength(curve: &PlanarCurve, n: usize) -> Result<PlanarCurve> {
    if n < 8 {
        return Err(Error::Parameter(format!("resampling needs n ≥ 8, got {n}")));
    }
    if curve.len() < 3 {
        return Err(Error::DegenerateCurve("resampling needs at least 3 vertices".into()));
    }
    let l = curve.length();
    if !(l > 0.0) {
        return Err(Error::DegenerateCurve("zero length".into()));
    }
    let ds = if curve.closed { l / n as f64 } else { l / (n - 1) as f64 };
    let pts = (0..n).map(|k| curve.point_at(k as f64 * ds)).collect();
    PlanarCurve::new(pts, curve.closed)
}

/// Curvature samples on a uniform arc-length grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    pub total_length: f64,
    /// Periodic profile of a closed curve: samples at `k·L/n`, `k < n`.
    pub closed: bool,
}

impl CurvatureProfile {
    /// Profile with uniform samples over `[0, L]` (open) or `[0, L)` (closed).
    pub fn from_samples(kappa: Vec<f64>, total_length: f64, closed: bool) -> Result<Self> {
        let n = kappa.len();
        if n < 2 || !(total_length > 0.0) || kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::Parameter("curvature profile needs ≥ 2 finite samples and positive length".into()));
        }
        let ds = if closed { total_length / n as f64 } else { total_length / (n - 1) as f64 };
        Ok(CurvatureProfile { s: (0..n).map(|k| k as f64 * ds).collect(), kappa, total_length, closed })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.s.get(1).copied().unwrap_or(self.total_length)
    }

    pub fn max(&self) -> f64 {
        self.kappa.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: &serde_json::Value) -> Result<()> {
        writeln!(out, "# {header}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "kappa"])?;
        for (s, k) in self.s.iter().zip(&self.kappa) {
            w.write_record([s.to_string(), k.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Linear interpolation at arc length `s` (periodic for closed profiles).
    fn at(&self, s: f64) -> f64 {
        let n = self.kappa.len();
        let ds = self.spacing();
        if self.closed {
            let u = s.rem_euclid(self.total_length) / ds;
            let k = (u.floor() as usize).min(n - 1);
            let t = u - k as f64;
            self.kappa[k] * (1.0 - t) + self.kappa[(k + 1) % n] * t
        } else {
            let u = (s / ds).clamp(0.0, (n - 1) as f64);
            let k = (u.floor() as usize).min(n - 2);
            let t = u - k as f64;
            self.kappa[k] * (1.0 - t) + self.kappa[k + 1] * t
        }
    }
}

/// Curvature of the circle through three points; 0 for collinear triples.
pub fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let (ab, bc, ca) = (a.dist(b), b.dist(c), c.dist(a));
    let denom = ab * bc * ca;
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (b - a).cross(c - b).abs() / denom
}

/// Menger curvature at every vertex. Interior vertices of open curves (and
/// all vertices of closed ones) use their neighbours; the two ends of an
/// open curve are linearly extrapolated from the first two interior values.
pub fn vertex_curvature(curve: &PlanarCurve) -> Vec<f64> {
    let v = curve.vertices();
    let n = v.len();
    if n < 3 {
        return vec![0.0; n];
    }
    if curve.closed() {
        return (0..n).map(|i| menger_curvature(v[(i + n - 1) % n], v[i], v[(i + 1) % n])).collect();
    }
    let mut k = vec![0.0; n];
    for i in 1..n - 1 {
        k[i] = menger_curvature(v[i - 1], v[i], v[i + 1]);
    }
    if n >= 4 {
        k[0] = (2.0 * k[1] - k[2]).max(0.0);
        k[n - 1] = (2.0 * k[n - 2] - k[n - 3]).max(0.0);
    } else {
        k[0] = k[1];
        k[n - 1] = k[1];
    }
    k
}

/// Curvature profile with `n` uniform samples. Curvature is measured at the
/// curve's own vertices and interpolated in arc length, so a curve that is
/// already uniformly sampled with `n` vertices is used as is.
pub fn curvature_profile(curve: &PlanarCurve, n: usize) -> Result<CurvatureProfile> {
    if n < 2 {
        return Err(Error::Parameter(format!("profile needs n ≥ 2, got {n}")));
    }
    if curve.len() < 3 {
        return Err(Error::DegenerateCurve("curvature needs at least 3 vertices".into()));
    }
    let kv = vertex_curvature(curve);
    let src = CurvatureSource { arc: curve.arc_lengths(), kappa: &kv, length: curve.length(), closed: curve.closed() };
    let l = curve.length();
    let ds = if curve.closed() { l / n as f64 } else { l / (n - 1) as f64 };
    let kappa = (0..n).map(|k| src.at(k as f64 * ds)).collect();
    CurvatureProfile::from_samples(kappa, l, curve.closed())
}

struct CurvatureSource<'a> {
    arc: &'a [f64],
    kappa: &'a [f64],
    length: f64,
    closed: bool,
}

impl CurvatureSource<'_> {
    fn at(&self, s: f64) -> f64 {
        let n = self.arc.len();
        let k = self.arc.partition_point(|&a| a <= s).saturating_sub(1);
        if k + 1 < n {
            let span = self.arc[k + 1] - self.arc[k];
            let t = ((s - self.arc[k]) / span).clamp(0.0, 1.0);
            self.kappa[k] * (1.0 - t) + self.kappa[k + 1] * t
        } else if self.closed {
            let span = self.length - self.arc[n - 1];
            let t = if span > 0.0 { ((s - self.arc[n - 1]) / span).clamp(0.0, 1.0) } else { 0.0 };
            self.kappa[n - 1] * (1.0 - t) + self.kappa[0] * t
        } else {
            self.kappa[n - 1]
        }
    }
}

/// Result of advecting a curve with adaptive refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvectedCurve {
    pub curve: PlanarCurve,
    /// Set when the refinement depth ran out before the spacing target was met.
    pub under_resolved: bool,
}

const MAX_REFINE_DEPTH: u32 = 12;

/// Advect every vertex by the flow map. Wherever image vertices are further
/// apart than `spacing_tol`, new source points are taken from a centripetal
/// Catmull–Rom interpolant of the source curve (so refinement does not flatten
/// it) and advected as well. Equal times return the curve unchanged.
pub fn advect_curve(
    system: &FlowSystem,
    curve: &PlanarCurve,
    t_a: f64,
    t_b: f64,
    step: f64,
    spacing_tol: f64,
) -> Result<AdvectedCurve> {
    if !(spacing_tol > 0.0) {
        return Err(Error::Parameter(format!("spacing tolerance must be positive, got {spacing_tol}")));
    }
    if t_a == t_b {
        return Ok(AdvectedCurve { curve: curve.clone(), under_resolved: false });
    }
    let src = curve.vertices();
    let images: Vec<Vec2> =
        src.par_iter().map(|&z| flow_map_unwrapped(system, z, t_a, t_b, step)).collect::<Result<_>>()?;
    let n = src.len();
    let closed = curve.closed();
    let n_seg = if closed { n } else { n - 1 };
    let at = |i: isize| -> Vec2 {
        if closed {
            src[i.rem_euclid(n as isize) as usize]
        } else if i < 0 {
            src[0] * 2.0 - src[1]
        } else if i as usize >= n {
            src[n - 1] * 2.0 - src[n - 2]
        } else {
            src[i as usize]
        }
    };
    let mut out = Vec::with_capacity(n);
    let mut under = false;
    for i in 0..n_seg {
        let j = (i + 1) % n;
        let ctrl = [at(i as isize - 1), src[i], src[j], at(i as isize + 2)];
        let seg = Segment { system, ctrl, t_a, t_b, step, tol: spacing_tol };
        out.push(images[i]);
        seg.refine((0.0, images[i]), (1.0, images[j]), 0, &mut out, &mut under)?;
    }
    if !closed {
        out.push(images[n - 1]);
    }
    Ok(AdvectedCurve { curve: PlanarCurve::new(out, closed)?, under_resolved: under })
}

/// Point at `u ∈ [0, 1]` on the centripetal Catmull–Rom span from `p[1]` to `p[2]`.
fn catmull_rom(p: [Vec2; 4], u: f64) -> Vec2 {
    let knot = |a: Vec2, b: Vec2| a.dist(b).sqrt().max(f64::MIN_POSITIVE);
    let t1 = knot(p[0], p[1]);
    let t2 = t1 + knot(p[1], p[2]);
    let t3 = t2 + knot(p[2], p[3]);
    let t = t1 + u * (t2 - t1);
    let mix = |a: Vec2, b: Vec2, lo: f64, hi: f64| a * ((hi - t) / (hi - lo)) + b * ((t - lo) / (hi - lo));
    let a1 = mix(p[0], p[1], 0.0, t1);
    let a2 = mix(p[1], p[2], t1, t2);
    let a3 = mix(p[2], p[3], t2, t3);
    let b1 = mix(a1, a2, 0.0, t2);
    let b2 = mix(a2, a3, t1, t3);
    mix(b1, b2, t1, t2)
}

struct Segment<'a> {
    system: &'a FlowSystem,
    ctrl: [Vec2; 4],
    t_a: f64,
    t_b: f64,
    step: f64,
    tol: f64,
}

impl Segment<'_> {
    /// Bisect `(u, image)` pairs until neighbouring images are within `tol`.
    fn refine(&self, a: (f64, Vec2), b: (f64, Vec2), depth: u32, out: &mut Vec<Vec2>, under: &mut bool) -> Result<()> {
        if a.1.dist(b.1) <= self.tol {
            return Ok(());
        }
        if depth >= MAX_REFINE_DEPTH {
            *under = true;
            return Ok(());
        }
        let u = 0.5 * (a.0 + b.0);
        let z = catmull_rom(self.ctrl, u);
        let mid = (u, flow_map_unwrapped(self.system, z, self.t_a, self.t_b, self.step)?);
        self.refine(a, mid, depth + 1, out, under)?;
        out.push(mid.1);
        self.refine(mid, b, depth + 1, out, under)
    }
}

fn check_comparable(k1: &CurvatureProfile, k2: &CurvatureProfile) -> Result<()> {
    if k1.len() != k2.len() {
        return Err(Error::Parameter(format!("profiles have {} and {} samples", k1.len(), k2.len())));
    }
    let (l1, l2) = (k1.total_length, k2.total_length);
    if (l1 - l2).abs() > 0.01 * l1.max(l2) {
        return Err(Error::LengthMismatch(l1, l2));
    }
    Ok(())
}

fn sup_diff_shifted(a: &[f64], b: &[f64], shift: usize) -> f64 {
    let n = a.len();
    let mut m: f64 = 0.0;
    for i in 0..n {
        m = m.max((a[i] - b[(i + shift) % n]).abs());
    }
    m
}

/// Circular shift `a` minimising `max_i |κ1[i] − κ2[i + a]|`, and that
/// residual. Ties go to the smallest shift.
pub fn align_profiles(k1: &CurvatureProfile, k2: &CurvatureProfile) -> Result<(usize, f64)> {
    check_comparable(k1, k2)?;
    let mut best = (0, f64::INFINITY);
    for a in 0..k1.len() {
        let r = sup_diff_shifted(&k1.kappa, &k2.kappa, a);
        if r < best.1 {
            best = (a, r);
        }
    }
    Ok(best)
}

/// Shape-change score of two profiles whose lengths may differ: both are
/// resampled on normalised arc length with `n` points and compared in the
/// sup norm at the best circular shift (closed profiles) or directly (open).
pub fn profile_change(before: &CurvatureProfile, after: &CurvatureProfile, n: usize) -> f64 {
    let sample = |p: &CurvatureProfile| -> Vec<f64> {
        let denom = if p.closed { n as f64 } else { (n - 1) as f64 };
        (0..n).map(|k| p.at(k as f64 / denom * p.total_length)).collect()
    };
    let (a, b) = (sample(before), sample(after));
    if before.closed && after.closed {
        (0..n).map(|s| sup_diff_shifted(&a, &b, s)).fold(f64::INFINITY, f64::min)
    } else {
        sup_diff_shifted(&a, &b, 0)
    }
}

/// Initial data of a Frenet-Serret reconstruction: `T(0) = C1`, `N(0) = C2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetFrame {
    pub c1: Vec2,
    pub c2: Vec2,
    pub gamma0: Vec2,
}

impl FrenetFrame {
    pub fn standard() -> Self {
        FrenetFrame { c1: Vec2::E1, c2: Vec2::E2, gamma0: Vec2::ZERO }
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        (self.c1.norm() - 1.0).abs() <= tol && (self.c2.norm() - 1.0).abs() <= tol && self.c1.dot(self.c2).abs() <= tol
    }
}

/// Rebuild a curve from its curvature: `Ψ = ∫κ`, `T = C1 cos Ψ + C2 sin Ψ`,
/// `γ = γ0 + ∫T`, both integrals by the trapezoid rule. A closed profile is
/// integrated over its full period and yields a closed curve.
pub fn frenet_reconstruct(profile: &CurvatureProfile, frame: &FrenetFrame) -> Result<PlanarCurve> {
    let mut kappa = profile.kappa.clone();
    if profile.closed {
        kappa.push(kappa[0]);
    }
    let ds = profile.spacing();
    let mut psi = 0.0;
    let mut prev_t = frame.c1;
    let mut gamma = frame.gamma0;
    let mut pts = Vec::with_capacity(kappa.len());
    pts.push(gamma);
    for k in 1..kappa.len() {
        psi += 0.5 * ds * (kappa[k - 1] + kappa[k]);
        let (sn, cs) = psi.sin_cos();
        let t = frame.c1 * cs + frame.c2 * sn;
        gamma += (prev_t + t) * (0.5 * ds);
        pts.push(gamma);
        prev_t = t;
    }
    if profile.closed {
        pts.pop();
    }
    PlanarCurve::new(pts, profile.closed)
}

/// Reconstruction comparison of two curvature profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceBound {
    /// `sup_s |κ1 − κ2|`.
    pub epsilon: f64,
    /// Bound `δ(s) = s²·ε·(‖C1‖ + ‖C2‖)`.
    pub delta: Vec<f64>,
    /// Observed `‖γ1(s) − γ2(s)‖` of the reconstructions.
    pub deviation: Vec<f64>,
    pub holds: bool,
}

/// Congruence bound for aligned, equal-length profiles, checked by
/// reconstructing both curves from the shared frame.
pub fn congruence_bound(k1: &CurvatureProfile, k2: &CurvatureProfile, frame: &FrenetFrame) -> Result<CongruenceBound> {
    check_comparable(k1, k2)?;
    let epsilon = k1.kappa.iter().zip(&k2.kappa).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // Compare over the open parameterisation so both curves share s.
    let open = |k: &CurvatureProfile| CurvatureProfile { closed: false, ..k.clone() };
    let (o1, o2) = (open(k1), open(k2));
    let g1 = frenet_reconstruct(&o1, frame)?;
    let g2 = frenet_reconstruct(&o2, frame)?;
    let c = frame.c1.norm() + frame.c2.norm();
    let delta: Vec<f64> = o1.s.iter().map(|s| s * s * epsilon * c).collect();
    let deviation: Vec<f64> = g1.vertices().iter().zip(g2.vertices()).map(|(a, b)| a.dist(*b)).collect();
    let scale = o1.total_length.max(1.0);
    let holds = deviation.len() == delta.len() && deviation.iter().zip(&delta).all(|(d, b)| *d <= b + 1e-12 * scale);
    Ok(CongruenceBound { epsilon, delta, deviation, holds })
}

/// How the closed-form curvature ratio is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// `|Q·(1, f′)|² / (1 + f′²)`, the ratio as printed for each case.
    Printed,
    /// The true curvature ratio `κ(γ₋ₜ)/κ(γₜ) = Printed^{3/2} / |det Q|`.
    Exact,
    /// First-order expansion of `Printed` in θ (rotation-scaling only).
    Taylor,
}

/// Deformation matrix `Q = B⁻¹F` of a linear case, with `theta = α − β` for
/// the rotation-scaling case.
pub fn ratio_matrix(case: LinearCase, theta: f64) -> Result<Mat2> {
    match case {
        LinearCase::RotationScaling { a, b, .. } => {
            if a == 0.0 || b == 0.0 {
                return Err(Error::Parameter("rotation-scaling requires a ≠ 0 and b ≠ 0".into()));
            }
            let (s, c) = theta.sin_cos();
            Ok(Mat2::new(a / b * c, -s / (a * b), a * b * s, b / a * c))
        }
        LinearCase::ShearA { a, b } => Ok(Mat2::new(1.0, a - b, 0.0, 1.0)),
        LinearCase::ShearB { a, b } => Ok(Mat2::new(1.0 - a * b, -b, a, 1.0)),
    }
}

/// Closed-form curvature ratio between a graph `(x, f(x))` at `-t` and its
/// image under `Q` at `t`, at a point of slope `fprime`.
pub fn analytic_curvature_ratio(case: LinearCase, fprime: f64, theta: f64, mode: RatioMode) -> Result<f64> {
    let q = ratio_matrix(case, theta)?;
    let denom = 1.0 + fprime * fprime;
    match mode {
        RatioMode::Printed | RatioMode::Exact => {
            let printed = (q * Vec2::new(1.0, fprime)).norm_sq() / denom;
            if mode == RatioMode::Printed {
                return Ok(printed);
            }
            let det = q.det().abs();
            if det == 0.0 {
                return Err(Error::Parameter("deformation matrix is singular".into()));
            }
            Ok(printed.powf(1.5) / det)
        }
        RatioMode::Taylor => match case {
            LinearCase::RotationScaling { a, b, .. } => {
                let f = fprime;
                Ok((a * a / (b * b) + b * b * f * f / (a * a)) / denom
                    + 2.0 * f * (b * b - 1.0 / (b * b)) / denom * theta)
            }
            _ => Err(Error::Parameter("the Taylor expansion is defined for the rotation-scaling case only".into())),
        },
    }
}

/// Curvature of `(s, f(s))` advected by the saddle `ẋ = λ1 x, ẏ = λ2 y` for
/// time `t`, at the point with slope `fprime` and second derivative `fsecond`.
pub fn curvature_evolution_saddle(lambda1: f64, lambda2: f64, fprime: f64, fsecond: f64, t: f64) -> f64 {
    let num = ((lambda2 - 2.0 * lambda1) * t).exp() * fsecond.abs();
    let den = (1.0 + fprime * fprime * (2.0 * (lambda2 - lambda1) * t).exp()).powf(1.5);
    num / den
}

/// Numerical counterpart of [`curvature_evolution_saddle`]: samples the graph
/// of `f` near `x0`, advects it through the saddle flow and measures the
/// discrete curvature of the image at the image of `x0`.
pub fn curvature_evolution_saddle_numeric(
    lambda1: f64,
    lambda2: f64,
    f: impl Fn(f64) -> f64 + Sync,
    x0: f64,
    t: f64,
    step: f64,
) -> Result<f64> {
    let params: BTreeMap<String, f64> = [("lambda1".to_string(), lambda1), ("lambda2".to_string(), lambda2)].into();
    let sys = FlowSystem::with_params(SystemId::LinearSaddle, &params)?;
    let dx = 1e-3;
    let pts = [-1.0, 0.0, 1.0].map(|k| {
        let x = x0 + k * dx;
        flow_map_unwrapped(&sys, Vec2::new(x, f(x)), 0.0, t, step)
    });
    let [a, b, c] = pts;
    let (a, b, c) = (a?, b?, c?);
    // Richardson step: repeat at half spacing and extrapolate the O(dx²) error.
    let coarse = menger_curvature(a, b, c);
    let half = [-0.5, 0.5].map(|k| {
        let x = x0 + k * dx;
        flow_map_unwrapped(&sys, Vec2::new(x, f(x)), 0.0, t, step)
    });
    let [ha, hc] = half;
    let fine = menger_curvature(ha?, b, hc?);
    Ok((4.0 * fine - coarse) / 3.0)
}

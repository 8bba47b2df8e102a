//! Shape-coherence factors: rasterized sets, rigid registration by
//! cross-correlation, and the area bound for nearly matching boundaries.

use crate::curvegeom::{advect_curve, resample_arclength, PlanarCurve};
use crate::flows::{FlowSystem, TimeEpoch};
use crate::{Error, Mat2, Result, Vec2};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_ANGLES: usize = 360;
const PADDING: f64 = 0.1;

/// Binary pixel mask on an axis-aligned grid. Pixel `(i, j)` covers
/// `origin + [i, i+1) × [j, j+1)` pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterSet {
    pub origin: Vec2,
    pub pixel: f64,
    pub width: usize,
    pub height: usize,
    mask: Vec<bool>,
}

impl RasterSet {
    pub fn from_mask(origin: Vec2, pixel: f64, width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height || !(pixel > 0.0) {
            return Err(Error::Parameter("mask size does not match grid".into()));
        }
        Ok(RasterSet { origin, pixel, width, height, mask })
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.width + i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.pixel * self.pixel
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new((i as f64 + 0.5) * self.pixel, (j as f64 + 0.5) * self.pixel)
    }

    /// Membership of the pixel containing `z`.
    pub fn contains(&self, z: Vec2) -> bool {
        let u = ((z.x - self.origin.x) / self.pixel).floor();
        let v = ((z.y - self.origin.y) / self.pixel).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return false;
        }
        self.mask[v as usize * self.width + u as usize]
    }

    /// Mean of the occupied pixel centres.
    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::ZERO;
        let mut n = 0usize;
        for j in 0..self.height {
            for i in 0..self.width {
                if self.get(i, j) {
                    c += self.center(i, j);
                    n += 1;
                }
            }
        }
        c * (1.0 / n.max(1) as f64)
    }

    /// Smallest sub-grid holding every occupied pixel (unchanged when empty).
    pub fn cropped(&self) -> RasterSet {
        let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
        for j in 0..self.height {
            for i in 0..self.width {
                if self.get(i, j) {
                    (i0, i1, j0, j1) = (i0.min(i), i1.max(i), j0.min(j), j1.max(j));
                }
            }
        }
        if i0 == usize::MAX {
            return self.clone();
        }
        let (w, h) = (i1 - i0 + 1, j1 - j0 + 1);
        let mut mask = Vec::with_capacity(w * h);
        for j in j0..=j1 {
            mask.extend_from_slice(&self.mask[j * self.width + i0..j * self.width + i1 + 1]);
        }
        let origin = self.origin + Vec2::new(i0 as f64, j0 as f64) * self.pixel;
        RasterSet { origin, pixel: self.pixel, width: w, height: h, mask }
    }

    /// Nearest-pixel resampling onto a grid with the given pixel size.
    pub fn resampled(&self, pixel: f64) -> RasterSet {
        let w = ((self.width as f64 * self.pixel / pixel).ceil() as usize).max(1);
        let h = ((self.height as f64 * self.pixel / pixel).ceil() as usize).max(1);
        let mut mask = vec![false; w * h];
        for j in 0..h {
            for i in 0..w {
                let z = self.origin + Vec2::new((i as f64 + 0.5) * pixel, (j as f64 + 0.5) * pixel);
                mask[j * w + i] = self.contains(z);
            }
        }
        RasterSet { origin: self.origin, pixel, width: w, height: h, mask }
    }

    /// Binary PGM (P5), top row first.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let mut row = vec![0u8; self.width];
        for j in (0..self.height).rev() {
            for (i, px) in row.iter_mut().enumerate() {
                *px = if self.get(i, j) { 255 } else { 0 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

/// Even-odd fill of a closed curve on a `resolution²` grid over its bounding
/// square padded by 10% on each side.
pub fn rasterize(boundary: &PlanarCurve, resolution: usize) -> Result<RasterSet> {
    let (lo, hi) = bounding_box(std::iter::once(boundary));
    let side = (hi.x - lo.x).max(hi.y - lo.y);
    let pixel = side * (1.0 + 2.0 * PADDING) / resolution as f64;
    rasterize_square(&[boundary], (lo + hi) * 0.5, pixel, resolution)
}

/// Even-odd fill on an explicit grid. Several curves are filled jointly, so
/// nested loops produce holes.
pub fn rasterize_on(
    curves: &[&PlanarCurve],
    origin: Vec2,
    pixel: f64,
    width: usize,
    height: usize,
) -> Result<RasterSet> {
    if curves.iter().any(|c| !c.closed()) {
        return Err(Error::DegenerateCurve("only closed curves bound a set".into()));
    }
    if !(pixel > 0.0) || width == 0 || height == 0 {
        return Err(Error::Parameter("raster grid must be nonempty with positive pixel size".into()));
    }
    let mut mask = vec![false; width * height];
    let mut xs = Vec::new();
    for j in 0..height {
        let y = origin.y + (j as f64 + 0.5) * pixel;
        xs.clear();
        for c in curves {
            let v = c.vertices();
            for k in 0..v.len() {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                if (a.y <= y && y < b.y) || (b.y <= y && y < a.y) {
                    xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let i0 = ((pair[0] - origin.x) / pixel - 0.5).ceil().max(0.0) as usize;
            let i1 = (((pair[1] - origin.x) / pixel - 0.5).ceil().max(0.0) as usize).min(width);
            for i in i0..i1 {
                mask[j * width + i] = true;
            }
        }
    }
    let r = RasterSet { origin, pixel, width, height, mask };
    if r.count() == 0 {
        return Err(Error::EmptySet);
    }
    Ok(r)
}

fn rasterize_square(curves: &[&PlanarCurve], center: Vec2, pixel: f64, resolution: usize) -> Result<RasterSet> {
    if resolution < 2 {
        return Err(Error::Parameter(format!("raster resolution must be ≥ 2, got {resolution}")));
    }
    let half = 0.5 * pixel * resolution as f64;
    rasterize_on(curves, center - Vec2::new(half, half), pixel, resolution, resolution)
}

fn bounding_box<'a>(curves: impl Iterator<Item = &'a PlanarCurve>) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for v in c.vertices() {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
    }
    (lo, hi)
}

/// `z ↦ R(angle)·z + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub angle: f64,
    pub translation: Vec2,
}

impl RigidMotion {
    pub const IDENTITY: RigidMotion = RigidMotion { angle: 0.0, translation: Vec2::ZERO };

    pub fn new(angle: f64, translation: Vec2) -> Self {
        RigidMotion { angle: wrap_angle(angle), translation }
    }

    pub fn apply(&self, z: Vec2) -> Vec2 {
        z.rotated(self.angle) + self.translation
    }

    pub fn inverse(&self) -> RigidMotion {
        RigidMotion::new(-self.angle, -self.translation.rotated(-self.angle))
    }

    /// Rotation by `angle` about `center`, then translation by `shift`.
    fn about(angle: f64, center: Vec2, shift: Vec2) -> Self {
        RigidMotion::new(angle, center - center.rotated(angle) + shift)
    }
}

/// Wrap to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Best rigid placement of `B` over `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    /// Motion `S` maximising `m(A ∩ S(B))`.
    pub motion: RigidMotion,
    /// `m(A ∩ S(B))` in system units.
    pub overlap: f64,
}

/// Rotation sweep with exact pixel-level translation search by FFT
/// cross-correlation, then local hill climbing at quarter steps.
pub fn register(a: &RasterSet, b: &RasterSet, n_angles: usize) -> Result<Registration> {
    register_impl(a, b, n_angles, true)
}

/// The search stage of [`register`] alone: the best motion over the angle
/// grid and integer pixel translations.
pub fn register_grid(a: &RasterSet, b: &RasterSet, n_angles: usize) -> Result<Registration> {
    register_impl(a, b, n_angles, false)
}

fn register_impl(a: &RasterSet, b: &RasterSet, n_angles: usize, refine: bool) -> Result<Registration> {
    if n_angles == 0 {
        return Err(Error::Parameter("n_angles must be positive".into()));
    }
    if a.count() == 0 || b.count() == 0 {
        return Err(Error::EmptySet);
    }
    let pixel = a.pixel.min(b.pixel);
    let a_work = if a.pixel > pixel { a.resampled(pixel) } else { a.clone() }.cropped();
    Registrar::new(&a_work, &b.cropped(), pixel).run(n_angles, refine)
}

struct Registrar<'a> {
    a: &'a RasterSet,
    b: &'a RasterSet,
    pixel: f64,
    c_b: Vec2,
    /// Upper bound on the side of any rotated copy of `B` in pixels.
    span: usize,
    n1: usize,
    n2: usize,
    fft1: Arc<dyn Fft<f64>>,
    fft2: Arc<dyn Fft<f64>>,
    ifft1: Arc<dyn Fft<f64>>,
    ifft2: Arc<dyn Fft<f64>>,
    fa: Vec<Complex<f64>>,
    a_points: Vec<Vec2>,
}

/// Rotated copy of `B` sampled on the lattice of `A`, starting at lattice
/// index `(i0, j0)`.
struct Rotated {
    i0: i64,
    j0: i64,
    w: usize,
    h: usize,
    mask: Vec<bool>,
}

#[derive(Clone, Copy)]
struct Candidate {
    count: i64,
    angle: f64,
    shift: (i64, i64),
}

impl<'a> Registrar<'a> {
    fn new(a: &'a RasterSet, b: &'a RasterSet, pixel: f64) -> Self {
        let c_b = b.centroid();
        let diag = (b.width as f64 * b.pixel).hypot(b.height as f64 * b.pixel);
        let span = (diag / pixel).ceil() as usize + 3;
        let n1 = smooth_size(a.width + span);
        let n2 = smooth_size(a.height + span);
        let mut planner = FftPlanner::new();
        let fft1 = planner.plan_fft_forward(n1);
        let fft2 = planner.plan_fft_forward(n2);
        let ifft1 = planner.plan_fft_inverse(n1);
        let ifft2 = planner.plan_fft_inverse(n2);
        let mut fa = vec![Complex::new(0.0, 0.0); n1 * n2];
        let mut a_points = Vec::new();
        for j in 0..a.height {
            for i in 0..a.width {
                if a.get(i, j) {
                    fa[j * n1 + i].re = 1.0;
                    a_points.push(a.center(i, j));
                }
            }
        }
        let mut r = Registrar { a, b, pixel, c_b, span, n1, n2, fft1, fft2, ifft1, ifft2, fa: Vec::new(), a_points };
        r.fft2d(&mut fa, false);
        r.fa = fa;
        r
    }

    fn angle(&self, k: usize, n: usize) -> f64 {
        wrap_angle(TAU * k as f64 / n as f64)
    }

    fn run(&self, n_angles: usize, refine: bool) -> Result<Registration> {
        let pairs: Vec<(usize, Option<usize>)> =
            (0..n_angles).step_by(2).map(|k| (k, (k + 1 < n_angles).then_some(k + 1))).collect();
        let best = pairs
            .par_iter()
            .map(|&(k1, k2)| self.correlate_pair(self.angle(k1, n_angles), k2.map(|k| self.angle(k, n_angles))))
            .flatten()
            .reduce_with(better)
            .ok_or(Error::EmptySet)?;
        let shift = Vec2::new(best.shift.0 as f64, best.shift.1 as f64) * self.pixel;
        let coarse = (best.angle, shift, best.count as f64 * self.pixel * self.pixel);
        let (angle, t, overlap) = if refine {
            let refined = self.hill_climb(best.angle, shift, TAU / n_angles as f64 / 4.0, self.pixel / 4.0);
            if refined.2 > coarse.2 {
                refined
            } else {
                coarse
            }
        } else {
            coarse
        };
        Ok(Registration { motion: RigidMotion::about(angle, self.c_b, t), overlap })
    }

    fn rotate_b(&self, angle: f64) -> Rotated {
        let p = self.pixel;
        let o = self.a.origin;
        let bo = self.b.origin;
        let (bw, bh) = (self.b.width as f64 * self.b.pixel, self.b.height as f64 * self.b.pixel);
        let corners = [bo, bo + Vec2::new(bw, 0.0), bo + Vec2::new(0.0, bh), bo + Vec2::new(bw, bh)]
            .map(|c| (c - self.c_b).rotated(angle) + self.c_b);
        let min_x = corners.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
        let min_y = corners.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
        let i0 = ((min_x - o.x) / p).floor() as i64 - 1;
        let j0 = ((min_y - o.y) / p).floor() as i64 - 1;
        let (w, h) = (self.span, self.span);
        let rot = Mat2::rotation(-angle);
        let mut mask = vec![false; w * h];
        for v in 0..h {
            for u in 0..w {
                let x = o + Vec2::new((i0 + u as i64) as f64 + 0.5, (j0 + v as i64) as f64 + 0.5) * p;
                mask[v * w + u] = self.b.contains(rot * (x - self.c_b) + self.c_b);
            }
        }
        Rotated { i0, j0, w, h, mask }
    }

    /// Correlates `A` with one or two rotated copies of `B` using a single
    /// complex transform (one copy in the real part, the other in the
    /// imaginary part).
    fn correlate_pair(&self, first: f64, second: Option<f64>) -> Vec<Candidate> {
        let ra = self.rotate_b(first);
        let rb = second.map(|a| self.rotate_b(a));
        let mut buf = vec![Complex::new(0.0, 0.0); self.n1 * self.n2];
        for (r, imag) in std::iter::once((&ra, false)).chain(rb.as_ref().map(|r| (r, true))) {
            for v in 0..r.h {
                for u in 0..r.w {
                    if r.mask[v * r.w + u] {
                        let c = &mut buf[v * self.n1 + u];
                        if imag {
                            c.im = 1.0;
                        } else {
                            c.re = 1.0;
                        }
                    }
                }
            }
        }
        self.fft2d(&mut buf, false);
        for (x, a) in buf.iter_mut().zip(&self.fa) {
            *x = a * x.conj();
        }
        self.fft2d(&mut buf, true);
        let scale = 1.0 / (self.n1 * self.n2) as f64;
        let mut out = vec![self.best_shift(&buf, &ra, first, |c| c.re * scale)];
        if let (Some(r), Some(angle)) = (rb.as_ref(), second) {
            out.push(self.best_shift(&buf, r, angle, |c| -c.im * scale));
        }
        out
    }

    /// Entry `e` of the circular correlation holds `Σ_x A[x]·M[x − e]` with
    /// `M` indexed from the rotated copy's own corner; lattice shift is
    /// `e + (i0, j0)`.
    fn best_shift(
        &self,
        corr: &[Complex<f64>],
        r: &Rotated,
        angle: f64,
        part: impl Fn(&Complex<f64>) -> f64,
    ) -> Candidate {
        let mut best = Candidate { count: -1, angle, shift: (0, 0) };
        for ey in 0..self.n2 {
            for ex in 0..self.n1 {
                let count = part(&corr[ey * self.n1 + ex]).round() as i64;
                if count < best.count || count <= 0 {
                    continue;
                }
                let dx = if ex >= self.n1 - r.w { ex as i64 - self.n1 as i64 } else { ex as i64 } - r.i0;
                let dy = if ey >= self.n2 - r.h { ey as i64 - self.n2 as i64 } else { ey as i64 } - r.j0;
                let cand = Candidate { count, angle, shift: (dx, dy) };
                if count > best.count || cand.shift < best.shift {
                    best = cand;
                }
            }
        }
        best.count = best.count.max(0);
        best
    }

    fn fft2d(&self, data: &mut [Complex<f64>], inverse: bool) {
        let (f1, f2) = if inverse { (&self.ifft1, &self.ifft2) } else { (&self.fft1, &self.fft2) };
        f1.process(data);
        let mut t = transpose(data, self.n1, self.n2);
        f2.process(&mut t);
        data.copy_from_slice(&transpose(&t, self.n2, self.n1));
    }

    /// Overlap area of `A` with `B` rotated by `angle` about its centroid
    /// and shifted by `t`, sampled at the pixel centres of `A`.
    fn overlap_at(&self, angle: f64, t: Vec2) -> f64 {
        let rot = Mat2::rotation(-angle);
        let n = self.a_points.iter().filter(|&&x| self.b.contains(rot * (x - t - self.c_b) + self.c_b)).count();
        n as f64 * self.pixel * self.pixel
    }

    fn hill_climb(&self, angle: f64, t: Vec2, da: f64, dt: f64) -> (f64, Vec2, f64) {
        let mut cur = (angle, t, self.overlap_at(angle, t));
        for _ in 0..1000 {
            let moves = [
                (da, Vec2::ZERO),
                (-da, Vec2::ZERO),
                (0.0, Vec2::new(dt, 0.0)),
                (0.0, Vec2::new(-dt, 0.0)),
                (0.0, Vec2::new(0.0, dt)),
                (0.0, Vec2::new(0.0, -dt)),
            ];
            let mut next = cur;
            for (a, d) in moves {
                let cand = (cur.0 + a, cur.1 + d);
                let v = self.overlap_at(cand.0, cand.1);
                if v > next.2 {
                    next = (cand.0, cand.1, v);
                }
            }
            if next.2 <= cur.2 {
                break;
            }
            cur = next;
        }
        cur
    }
}

fn better(x: Candidate, y: Candidate) -> Candidate {
    let key = |c: &Candidate| (std::cmp::Reverse(c.count), c.angle, c.shift);
    let (kx, ky) = (key(&x), key(&y));
    match kx.0.cmp(&ky.0).then(kx.1.total_cmp(&ky.1)).then(kx.2.cmp(&ky.2)) {
        std::cmp::Ordering::Greater => y,
        _ => x,
    }
}

fn transpose(data: &[Complex<f64>], cols: usize, rows: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Smallest `2^a·3^b ≥ n`.
fn smooth_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1;
    while p3 < best {
        let mut m = p3;
        while m < n {
            m *= 2;
        }
        best = best.min(m);
        p3 *= 3;
    }
    best
}

/// Registration and sampling parameters for the coherence factors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceParams {
    /// Pixels per side of the larger set's padded bounding square.
    pub resolution: usize,
    pub n_angles: usize,
    /// Integrator step for advection.
    pub step: f64,
    /// Image spacing target for curve advection; defaults to 1/1000 of the
    /// initial boundary length.
    pub spacing_tol: Option<f64>,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        CoherenceParams { resolution: DEFAULT_RESOLUTION, n_angles: DEFAULT_ANGLES, step: 1e-3, spacing_tol: None }
    }
}

impl CoherenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 16 {
            return Err(Error::Config(format!("resolution must be ≥ 16, got {}", self.resolution)));
        }
        if self.n_angles == 0 {
            return Err(Error::Config("n_angles must be positive".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if self.spacing_tol.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("spacing_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of the shape-coherence evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub alpha: f64,
    pub best_motion: RigidMotion,
    pub intersect_area: f64,
    pub area_b: f64,
    /// Time at which the boundary of `A` is given.
    pub t_start: f64,
    /// Time of the image compared with `B` (the maximiser for β).
    pub t_end: f64,
    pub under_resolved: bool,
    /// `(t, α(t))` samples; a single entry for α.
    pub series: Vec<(f64, f64)>,
    pub bound: Option<BoundCheck>,
}

/// Registers two closed curves rasterized at a shared pixel size.
pub fn alpha_of_curves(
    a: &PlanarCurve,
    b: &PlanarCurve,
    resolution: usize,
    n_angles: usize,
) -> Result<(Registration, f64)> {
    let (lo_a, hi_a) = bounding_box(std::iter::once(a));
    let (lo_b, hi_b) = bounding_box(std::iter::once(b));
    let side = (hi_a.x - lo_a.x).max(hi_a.y - lo_a.y).max(hi_b.x - lo_b.x).max(hi_b.y - lo_b.y);
    let pixel = side * (1.0 + 2.0 * PADDING) / resolution as f64;
    let ra = rasterize_square(&[a], (lo_a + hi_a) * 0.5, pixel, resolution)?;
    let rb = rasterize_square(&[b], (lo_b + hi_b) * 0.5, pixel, resolution)?;
    let reg = register(&ra, &rb, n_angles)?;
    Ok((reg, rb.area()))
}

fn report_at(
    system: &FlowSystem,
    a: &PlanarCurve,
    b: &PlanarCurve,
    t_start: f64,
    t_end: f64,
    params: &CoherenceParams,
) -> Result<CoherenceReport> {
    if !a.closed() || !b.closed() {
        return Err(Error::DegenerateCurve("coherence needs closed boundaries".into()));
    }
    let tol = params.spacing_tol.unwrap_or(a.length() / 1000.0);
    let image = advect_curve(system, a, t_start, t_end, params.step, tol)?;
    let (reg, area_b) = alpha_of_curves(&image.curve, b, params.resolution, params.n_angles)?;
    let intersect_area = reg.overlap.min(area_b);
    let alpha = intersect_area / area_b;
    Ok(CoherenceReport {
        alpha,
        best_motion: reg.motion,
        intersect_area,
        area_b,
        t_start,
        t_end,
        under_resolved: image.under_resolved,
        series: vec![(t_end, alpha)],
        bound: None,
    })
}

/// `α(A, B, T)`: advects the boundary of `A` from the start to the end of
/// the epoch and registers the image against `B` (`A` itself when omitted).
pub fn alpha(
    system: &FlowSystem,
    a: &PlanarCurve,
    b: Option<&PlanarCurve>,
    epoch: &TimeEpoch,
    params: &CoherenceParams,
) -> Result<CoherenceReport> {
    params.validate()?;
    epoch.validate_span()?;
    report_at(system, a, b.unwrap_or(a), epoch.start(), epoch.end(), params)
}

/// `β = max_t α(A, B, t)` over `n_times` uniform times in the epoch, with
/// the whole series attached.
pub fn beta(
    system: &FlowSystem,
    a: &PlanarCurve,
    b: Option<&PlanarCurve>,
    epoch: &TimeEpoch,
    n_times: usize,
    params: &CoherenceParams,
) -> Result<CoherenceReport> {
    params.validate()?;
    epoch.validate_span()?;
    if n_times < 2 {
        return Err(Error::Parameter(format!("beta needs n_times ≥ 2, got {n_times}")));
    }
    let b = b.unwrap_or(a);
    let (t1, t2) = (epoch.start(), epoch.end());
    let mut best: Option<CoherenceReport> = None;
    let mut series = Vec::with_capacity(n_times);
    let mut under = false;
    for k in 0..n_times {
        let t = t1 + (t2 - t1) * k as f64 / (n_times - 1) as f64;
        let r = report_at(system, a, b, t1, t, params)?;
        series.push((t, r.alpha));
        under |= r.under_resolved;
        if best.as_ref().map_or(true, |b| r.alpha > b.alpha) {
            best = Some(r);
        }
    }
    let mut best = best.ok_or(Error::EmptySet)?;
    best.series = series;
    best.under_resolved = under;
    Ok(best)
}

/// Quantities of the area bound for two nearly matching boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub epsilon: f64,
    pub m: f64,
    pub delta: f64,
    /// Outer boundary loops of `A1 ∩ A2`.
    pub components: usize,
    pub intersect_area: f64,
    pub area_a2: f64,
    /// Registered `α(A1, A2, 0)`.
    pub alpha: f64,
    /// `α ≥ 1 − Δ`.
    pub holds: bool,
    /// `Δ ≥ 1`: the bound says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BoundCheck {
    Checked(TheoremBound),
    Inapplicable { reason: String },
}

/// Parameters of [`coherence_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub resolution: usize,
    pub n_angles: usize,
    /// Samples per loop for the parameterised comparison.
    pub n_samples: usize,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams { resolution: DEFAULT_RESOLUTION, n_angles: DEFAULT_ANGLES, n_samples: 512 }
    }
}

/// Checks `α(A1, A2, 0) ≥ 1 − Δ(ε)` with `Δ = 2πMε / Area(A2)`, where `γ`
/// is the boundary of `A1 ∩ A2` traced from the intersected masks. Both
/// `γ` and `γ2` are parameterised by `s ∈ [0, 2π)` at uniform arc length,
/// lined up by the circular shift minimising the positional sup distance,
/// and differentiated by central differences. Multiple components each
/// contribute their own `2πMε` term.
pub fn coherence_bound(gamma1: &PlanarCurve, gamma2: &PlanarCurve, params: &BoundParams) -> Result<BoundCheck> {
    if !gamma1.closed() || !gamma2.closed() {
        return Err(Error::DegenerateCurve("the area bound needs closed boundaries".into()));
    }
    let (lo, hi) = bounding_box([gamma1, gamma2].into_iter());
    let side = (hi.x - lo.x).max(hi.y - lo.y);
    let pixel = side * (1.0 + 2.0 * PADDING) / params.resolution as f64;
    let center = (lo + hi) * 0.5;
    let m1 = rasterize_square(&[gamma1], center, pixel, params.resolution)?;
    let m2 = rasterize_square(&[gamma2], center, pixel, params.resolution)?;
    let inter: Vec<bool> = m1.mask.iter().zip(&m2.mask).map(|(a, b)| *a && *b).collect();
    let inter = RasterSet { mask: inter, ..m1.clone() };
    if inter.count() == 0 {
        return Ok(BoundCheck::Inapplicable { reason: "the sets do not intersect".into() });
    }
    // When the intersection is one of the sets on the raster, its exact
    // boundary stands in for the traced contour.
    let loops: Vec<PlanarCurve> = if inter.mask == m2.mask {
        vec![gamma2.clone()]
    } else if inter.mask == m1.mask {
        vec![gamma1.clone()]
    } else {
        mask_contours(&inter)
            .into_iter()
            .filter_map(|l| PlanarCurve::new(l, true).ok())
            .filter(|c| c.signed_area() > 0.0 && c.len() >= 8)
            .collect()
    };
    if loops.is_empty() {
        return Ok(BoundCheck::Inapplicable { reason: "the intersection has no resolvable boundary".into() });
    }
    let area_a2 = gamma2.signed_area().abs();
    let g2 = oriented_samples(gamma2, params.n_samples)?;
    let mut epsilon: f64 = 0.0;
    let mut m: f64 = 0.0;
    let mut delta = 0.0;
    for l in &loops {
        let g = oriented_samples(l, params.n_samples)?;
        let origin = l.centroid();
        let shift = best_position_shift(&g, &g2);
        let (e, mk) = epsilon_and_m(&g, &g2, shift, origin);
        epsilon = epsilon.max(e);
        m = m.max(mk);
        delta += TAU * mk * e / area_a2;
    }
    let reg = register(&m1, &m2, params.n_angles)?;
    let alpha = (reg.overlap / m2.area()).min(1.0);
    Ok(BoundCheck::Checked(TheoremBound {
        epsilon,
        m,
        delta,
        components: loops.len(),
        intersect_area: inter.area(),
        area_a2,
        alpha,
        holds: alpha >= 1.0 - delta,
        vacuous: delta >= 1.0,
    }))
}

fn oriented_samples(c: &PlanarCurve, n: usize) -> Result<Vec<Vec2>> {
    let r = resample_arclength(c, n)?;
    let mut v = r.vertices().to_vec();
    if r.signed_area() < 0.0 {
        v.reverse();
    }
    Ok(v)
}

fn best_position_shift(g: &[Vec2], g2: &[Vec2]) -> usize {
    let n = g.len();
    let sup = |s: usize| (0..n).map(|i| (g[i] - g2[(i + s) % n]).norm()).fold(0.0, f64::max);
    (0..n).map(|s| (s, sup(s))).fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b }).0
}

fn epsilon_and_m(g: &[Vec2], g2: &[Vec2], shift: usize, origin: Vec2) -> (f64, f64) {
    let n = g.len();
    let ds = TAU / n as f64;
    let at = |c: &[Vec2], i: usize| c[i % n] - origin;
    let d = |c: &[Vec2], i: usize| (c[(i + 1) % n] - c[(i + n - 1) % n]) * (0.5 / ds);
    let (mut eps, mut mmax): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let (p, p2) = (at(g, i), at(g2, i + shift));
        let (dp, dp2) = (d(g, i), d(g2, (i + shift) % n));
        eps = eps.max((p.x - p2.x).abs()).max((p.y - p2.y).abs()).max((dp.x - dp2.x).abs()).max((dp.y - dp2.y).abs());
        for v in [p.x, p.y, p2.x, p2.y, dp.x, dp.y, dp2.x, dp2.y] {
            mmax = mmax.max(v.abs());
        }
    }
    (eps, 2.0 * mmax)
}

/// Level-½ contours of a Gaussian-smoothed mask by marching squares, as
/// closed loops with the set on the left (outer loops counter-clockwise).
pub fn mask_contours(set: &RasterSet) -> Vec<Vec<Vec2>> {
    const PAD: usize = 4;
    let (w, h) = (set.width + 2 * PAD, set.height + 2 * PAD);
    let mut f = vec![0.0; w * h];
    for j in 0..set.height {
        for i in 0..set.width {
            if set.get(i, j) {
                f[(j + PAD) * w + i + PAD] = 1.0;
            }
        }
    }
    let f = gaussian_blur(&f, w, h, 1.0);
    let node = |i: usize, j: usize| {
        set.origin + Vec2::new((i as f64 - PAD as f64 + 0.5) * set.pixel, (j as f64 - PAD as f64 + 0.5) * set.pixel)
    };
    let val = |i: usize, j: usize| f[j * w + i];
    // Edge ids: horizontal (i,j)-(i+1,j) → 2(j·w+i); vertical (i,j)-(i,j+1) → 2(j·w+i)+1.
    let h_id = |i: usize, j: usize| 2 * (j * w + i);
    let v_id = |i: usize, j: usize| 2 * (j * w + i) + 1;
    let cross = |a: (usize, usize), b: (usize, usize)| {
        let (fa, fb) = (val(a.0, a.1), val(b.0, b.1));
        let t = (0.5 - fa) / (fb - fa);
        node(a.0, a.1).lerp(node(b.0, b.1), t)
    };
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut pos: HashMap<usize, Vec2> = HashMap::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let inside = c.map(|(x, y)| val(x, y) > 0.5);
            let case = inside.iter().enumerate().fold(0, |acc, (k, &b)| acc | ((b as usize) << k));
            if case == 0 || case == 15 {
                continue;
            }
            let edges = [h_id(i, j), v_id(i + 1, j), h_id(i, j + 1), v_id(i, j)];
            let ends = [(c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3])];
            let center_in = c.iter().map(|&(x, y)| val(x, y)).sum::<f64>() / 4.0 > 0.5;
            let e = |k: usize| k % 4;
            let mut segs: Vec<(usize, usize)> = Vec::with_capacity(2);
            match case {
                5 if center_in => segs.extend([(0, 1), (2, 3)]),
                5 => segs.extend([(0, 3), (2, 1)]),
                10 if center_in => segs.extend([(3, 0), (1, 2)]),
                10 => segs.extend([(1, 0), (3, 2)]),
                _ => {
                    let ins: Vec<usize> = (0..4).filter(|&k| inside[k]).collect();
                    match ins.len() {
                        1 => segs.push((ins[0], e(ins[0] + 3))),
                        3 => {
                            let out = (0..4).find(|&k| !inside[k]).unwrap_or(0);
                            segs.push((e(out + 3), out));
                        }
                        _ => {
                            // two adjacent inside corners k, k+1
                            let k = if inside[0] && inside[3] { 3 } else { ins[0] };
                            segs.push((e(k + 1), e(k + 3)));
                        }
                    }
                }
            }
            for (from, to) in segs {
                for k in [from, to] {
                    pos.entry(edges[k]).or_insert_with(|| cross(ends[k].0, ends[k].1));
                }
                next.insert(edges[from], edges[to]);
            }
        }
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut l = Vec::new();
        let mut cur = s;
        while seen.insert(cur) {
            l.push(pos[&cur]);
            match next.get(&cur) {
                Some(&n) => cur = n,
                None => break,
            }
        }
        if l.len() >= 3 {
            loops.push(l);
        }
    }
    loops
}

fn gaussian_blur(f: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let pass = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; src.len()];
        for j in 0..h as i64 {
            for i in 0..w as i64 {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let o = t as i64 - r;
                    let (x, y) = if horizontal { (i + o, j) } else { (i, j + o) };
                    if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
                        acc += kv * src[y as usize * w + x as usize];
                    }
                }
                out[j as usize * w + i as usize] = acc;
            }
        }
        out
    };
    pass(&pass(f, true), false)
}

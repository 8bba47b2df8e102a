//! Finite-time stable/unstable foliations and the splitting-angle field.

use crate::flows::{flow_jacobian_unwrapped, flow_map_unwrapped, DomainBox, FlowSystem, TimeEpoch};
use crate::{Error, Mat2, Result, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Relative singular-value gap below which singular directions are undefined.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Singular value decomposition `M = U·diag(σ1, σ2)·Vᵀ` of a 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Svd2 {
    pub u1: Vec2,
    pub u2: Vec2,
    pub v1: Vec2,
    pub v2: Vec2,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Svd2 {
    /// True when the singular directions are numerically arbitrary.
    pub fn is_degenerate(&self) -> bool {
        !(self.sigma1 > 0.0) || (self.sigma1 - self.sigma2) / self.sigma1 < DEGENERACY_GAP
    }

    pub fn reconstruct(&self) -> Mat2 {
        let u = Mat2::from_cols(self.u1, self.u2);
        let vt = Mat2::from_cols(self.v1, self.v2).transpose();
        u * Mat2::diag(self.sigma1, self.sigma2) * vt
    }
}

/// Closed-form SVD. Each right singular vector is put in canonical orientation
/// (first nonzero component positive) and its left partner flipped with it.
pub fn svd2(m: Mat2) -> Svd2 {
    let [[m00, m01], [m10, m11]] = m.0;
    let e = 0.5 * (m00 + m11);
    let f = 0.5 * (m00 - m11);
    let g = 0.5 * (m10 + m01);
    let h = 0.5 * (m10 - m01);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let sigma1 = q + r;
    // |q - r| cancels badly when σ2 ≪ σ1; the determinant does not.
    let sigma2 = if sigma1 > 0.0 { (m.det().abs() / sigma1).min(sigma1) } else { 0.0 };
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let mut v1 = Vec2::new(ct, -st);
    let mut v2 = Vec2::new(st, ct);
    let mut u1 = Vec2::new(cp, sp);
    let mut u2 = Vec2::new(-sp, cp);
    if q < r {
        u2 = -u2;
    }
    if v1.canonical() != v1 {
        v1 = -v1;
        u1 = -u1;
    }
    if v2.canonical() != v2 {
        v2 = -v2;
        u2 = -u2;
    }
    Svd2 { u1, u2, v1, v2, sigma1, sigma2 }
}

/// Foliation data at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliationSample {
    pub z: Vec2,
    pub f_s: Vec2,
    pub f_u: Vec2,
    /// Splitting angle in `[0, π/2]`; `None` when degenerate.
    pub theta: Option<f64>,
    pub signed: Option<f64>,
    pub sigma1_fwd: f64,
    pub sigma2_fwd: f64,
    pub sigma1_bwd: f64,
    pub sigma2_bwd: f64,
    pub degenerate: bool,
}

impl FoliationSample {
    fn failed(z: Vec2) -> Self {
        FoliationSample {
            z,
            f_s: Vec2::ZERO,
            f_u: Vec2::ZERO,
            theta: None,
            signed: None,
            sigma1_fwd: f64::NAN,
            sigma2_fwd: f64::NAN,
            sigma1_bwd: f64::NAN,
            sigma2_bwd: f64::NAN,
            degenerate: true,
        }
    }
}

fn degenerate_err(z: Vec2) -> Error {
    Error::DegenerateFoliation { x: z.x, y: z.y }
}

/// `f_s`: the second right singular vector of `DΦ` over `[t0, t0+T]`.
pub fn stable_foliation(system: &FlowSystem, z: Vec2, epoch: &TimeEpoch, step: f64) -> Result<Vec2> {
    epoch.validate()?;
    let jet = flow_jacobian_unwrapped(system, z, epoch.t0, epoch.end(), step)?;
    let svd = svd2(jet.jacobian);
    if svd.is_degenerate() {
        return Err(degenerate_err(z));
    }
    Ok(svd.v2)
}

/// `f_u`: the first left singular vector of `DΦ` over `[t0-T, t0]`, evaluated
/// at the backward image `w = Φ_{t0→t0-T}(z)`.
pub fn unstable_foliation(system: &FlowSystem, z: Vec2, epoch: &TimeEpoch, step: f64) -> Result<Vec2> {
    epoch.validate()?;
    let w = flow_map_unwrapped(system, z, epoch.t0, epoch.start(), step)?;
    let jet = flow_jacobian_unwrapped(system, w, epoch.start(), epoch.t0, step)?;
    let svd = svd2(jet.jacobian);
    if svd.is_degenerate() {
        return Err(degenerate_err(z));
    }
    Ok(svd.u1.canonical())
}

/// Both foliations from one forward and one backward Jacobian.
///
/// The backward Jacobian `DΦ_{t0→t0-T}(z)` is the inverse of the forward
/// Jacobian at `w`, so its second right singular vector is `ū1`; this avoids
/// the extra trajectory of the literal route in [`unstable_foliation`].
pub fn foliation_sample(system: &FlowSystem, z: Vec2, epoch: &TimeEpoch, step: f64) -> Result<FoliationSample> {
    epoch.validate()?;
    let fwd = svd2(flow_jacobian_unwrapped(system, z, epoch.t0, epoch.end(), step)?.jacobian);
    let bwd = svd2(flow_jacobian_unwrapped(system, z, epoch.t0, epoch.start(), step)?.jacobian);
    let degenerate = fwd.is_degenerate() || bwd.is_degenerate();
    let (f_s, f_u) = (fwd.v2, bwd.v2);
    let (theta, signed) =
        if degenerate { (None, None) } else { (splitting_angle(f_s, f_u), splitting_signed(f_s, f_u)) };
    Ok(FoliationSample {
        z,
        f_s,
        f_u,
        theta,
        signed,
        sigma1_fwd: fwd.sigma1,
        sigma2_fwd: fwd.sigma2,
        sigma1_bwd: 1.0 / bwd.sigma2,
        sigma2_bwd: 1.0 / bwd.sigma1,
        degenerate,
    })
}

fn usable(v: Vec2) -> bool {
    v.is_finite() && v.norm_sq() > 0.0
}

/// Included angle of two line fields, in `[0, π/2]`.
pub fn splitting_angle(f_s: Vec2, f_u: Vec2) -> Option<f64> {
    if !usable(f_s) || !usable(f_u) {
        return None;
    }
    let (a, b) = (f_s.normalized(), f_u.normalized());
    // atan2 keeps full relative accuracy near 0, where arccos of a dot product does not.
    Some(a.cross(b).abs().atan2(a.dot(b).abs()))
}

/// Signed splitting `sin` of the included angle, zero exactly on parallel lines.
///
/// The cross product is taken after orienting `f_u` to make an acute angle
/// with `f_s`, so the value is independent of either vector's sign and
/// changes sign smoothly through zero splitting.
pub fn splitting_signed(f_s: Vec2, f_u: Vec2) -> Option<f64> {
    if !usable(f_s) || !usable(f_u) {
        return None;
    }
    let (a, b) = (f_s.normalized(), f_u.normalized());
    let c = a.cross(b);
    Some(if a.dot(b) < 0.0 { -c } else { c })
}

/// Uniform grid of nodes including both ends of each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "box")]
    pub bbox: DomainBox,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, bbox: DomainBox) -> Result<Self> {
        let g = GridSpec { nx, ny, bbox };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config(format!("grid needs at least 2×2 nodes, got {}×{}", self.nx, self.ny)));
        }
        self.bbox.validate()
    }

    pub fn dx(&self) -> f64 {
        self.bbox.width() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.bbox.height() / (self.ny - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.bbox.x_min + i as f64 * self.dx(), self.bbox.y_min + j as f64 * self.dy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Foliation samples on every node of a grid, row-major (`index = j·nx + i`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleField {
    pub grid: GridSpec,
    pub epoch: TimeEpoch,
    pub step: f64,
    pub samples: Vec<FoliationSample>,
}

impl AngleField {
    pub fn sample(&self, i: usize, j: usize) -> &FoliationSample {
        &self.samples[j * self.grid.nx + i]
    }

    /// Number of nodes with a defined angle below `threshold`.
    pub fn count_below(&self, threshold: f64) -> usize {
        self.samples.iter().filter(|s| s.theta.is_some_and(|t| t < threshold)).count()
    }

    /// CSV with a leading `# {json}` header line.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &serde_json::Value) -> Result<()> {
        writeln!(out, "# {header}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "x", "y", "fs_x", "fs_y", "fu_x", "fu_y", "theta", "signed", "degenerate"])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        for (k, s) in self.samples.iter().enumerate() {
            let (i, j) = (k % self.grid.nx, k / self.grid.nx);
            w.write_record([
                i.to_string(),
                j.to_string(),
                s.z.x.to_string(),
                s.z.y.to_string(),
                s.f_s.x.to_string(),
                s.f_s.y.to_string(),
                s.f_u.x.to_string(),
                s.f_u.y.to_string(),
                opt(s.theta),
                opt(s.signed),
                u8::from(s.degenerate).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate foliations on every grid node. Integration failures at a node are
/// recorded as degenerate samples.
pub fn angle_field(system: &FlowSystem, grid: &GridSpec, epoch: &TimeEpoch, step: f64) -> Result<AngleField> {
    grid.validate()?;
    epoch.validate()?;
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let z = grid.node(k % grid.nx, k / grid.nx);
            foliation_sample(system, z, epoch, step).unwrap_or_else(|e| {
                log::debug!("foliation failed at {z:?}: {e}");
                FoliationSample::failed(z)
            })
        })
        .collect();
    Ok(AngleField { grid: *grid, epoch: *epoch, step, samples })
}

/// θ along the horizontal line at height `y`, at `n` evenly spaced x values.
pub fn angle_slice(
    system: &FlowSystem,
    y: f64,
    x_range: (f64, f64),
    n: usize,
    epoch: &TimeEpoch,
    step: f64,
) -> Result<Vec<(f64, Option<f64>)>> {
    if n < 2 {
        return Err(Error::Config(format!("slice needs n ≥ 2, got {n}")));
    }
    epoch.validate()?;
    let dx = (x_range.1 - x_range.0) / (n - 1) as f64;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let x = x_range.0 + i as f64 * dx;
            let theta = foliation_sample(system, Vec2::new(x, y), epoch, step).ok().and_then(|s| s.theta);
            (x, theta)
        })
        .collect())
}

/// Number of maximal runs of consecutive slice points with θ below `threshold`.
pub fn count_dips(slice: &[(f64, Option<f64>)], threshold: f64) -> usize {
    let mut dips = 0;
    let mut inside = false;
    for (_, theta) in slice {
        let below = theta.is_some_and(|t| t < threshold);
        if below && !inside {
            dips += 1;
        }
        inside = below;
    }
    dips
}

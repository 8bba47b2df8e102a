//! C ABI over the `shapecoh` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` (or by a
//! computation) and released by the matching `*_free`. Every fallible call
//! returns a [`ShcStatus`]; on failure [`shc_last_error`] describes it.
//! Points are passed as interleaved `x, y` pairs and 2×2 matrices row-major.

use shapecoh::coherence::{alpha, CoherenceParams};
use shapecoh::curvegeom::{advect_curve, curvature_profile, PlanarCurve};
use shapecoh::flows::{flow_jacobian, flow_map, FlowSystem, SystemId, TimeEpoch};
use shapecoh::foliations::{foliation_sample, GridSpec};
use shapecoh::zerocurves::{find_zero_curves, ContinuationConfig, ZeroCurve};
use shapecoh::{Error, Vec2};
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    NumericalError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// A flow system with its parameters.
pub struct ShcSystem {
    id: SystemId,
    params: BTreeMap<String, f64>,
    system: FlowSystem,
}

/// A planar polyline, open or closed.
pub struct ShcCurve(PlanarCurve);

/// Zero-splitting curves from one pipeline run.
pub struct ShcCurveSet(Vec<ZeroCurve>);

/// Foliation data at one point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ShcFoliation {
    pub fs: [f64; 2],
    pub fu: [f64; 2],
    /// Splitting angle in `[0, π/2]`; NaN when degenerate.
    pub theta: f64,
    /// Signed splitting; NaN when degenerate.
    pub signed_splitting: f64,
    pub sigma1_fwd: f64,
    pub sigma2_fwd: f64,
    pub sigma1_bwd: f64,
    pub sigma2_bwd: f64,
    pub degenerate: c_int,
}

/// Shape-coherence factor and the registering motion `z ↦ R(angle)z + t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ShcCoherence {
    pub alpha: f64,
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
    pub intersect_area: f64,
    pub area_b: f64,
    pub under_resolved: c_int,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(ShcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = if e.is_config() { ShcStatus::ConfigError } else { ShcStatus::NumericalError };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ShcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(ShcStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ShcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ShcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ShcStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn points(xy: *const f64, n: usize) -> Result<Vec<Vec2>, Fail> {
    if xy.is_null() {
        return Err(null("xy"));
    }
    let s = std::slice::from_raw_parts(xy, 2 * n);
    Ok(s.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect())
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn shc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a system by id (`"double_gyre"`, `"rossby_wave"`, `"linear_saddle"`, ...)
/// with its default parameters.
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shc_system_new(id: *const c_char, out: *mut *mut ShcSystem) -> ShcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let id: SystemId = c_str(id, "id")?.parse()?;
        let system = FlowSystem::new(id);
        *out = Box::into_raw(Box::new(ShcSystem { id, params: BTreeMap::new(), system }));
        Ok(())
    })
}

/// Override one parameter; unknown names are rejected and leave the system unchanged.
///
/// # Safety
/// `system` must come from [`shc_system_new`]; `name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn shc_system_set_param(system: *mut ShcSystem, name: *const c_char, value: f64) -> ShcStatus {
    guard(|| {
        let s = out_ptr(system, "system")?;
        let mut params = s.params.clone();
        params.insert(c_str(name, "name")?.to_string(), value);
        s.system = FlowSystem::with_params(s.id, &params)?;
        s.params = params;
        Ok(())
    })
}

/// # Safety
/// `system` must come from [`shc_system_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn shc_system_free(system: *mut ShcSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Image of `(x, y)` from `t_a` to `t_b`, written to `out_xy[2]`.
///
/// # Safety
/// `system` must be a live handle and `out_xy` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn shc_flow_map(
    system: *const ShcSystem,
    x: f64,
    y: f64,
    t_a: f64,
    t_b: f64,
    step: f64,
    out_xy: *mut f64,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        if out_xy.is_null() {
            return Err(null("out_xy"));
        }
        let p = flow_map(&s.system, Vec2::new(x, y), t_a, t_b, step)?;
        *out_xy = p.x;
        *out_xy.add(1) = p.y;
        Ok(())
    })
}

/// Flow-map Jacobian (row-major, four doubles) from `t_a` to `t_b`.
///
/// # Safety
/// `system` must be a live handle and `out_jac` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn shc_flow_jacobian(
    system: *const ShcSystem,
    x: f64,
    y: f64,
    t_a: f64,
    t_b: f64,
    step: f64,
    out_jac: *mut f64,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        if out_jac.is_null() {
            return Err(null("out_jac"));
        }
        let j = flow_jacobian(&s.system, Vec2::new(x, y), t_a, t_b, step)?.jacobian;
        for (k, v) in [j.0[0][0], j.0[0][1], j.0[1][0], j.0[1][1]].into_iter().enumerate() {
            *out_jac.add(k) = v;
        }
        Ok(())
    })
}

/// Stable and unstable foliations at `(x, y)` over `[t0 − T, t0 + T]`.
/// A degenerate point is reported in `out`, not as an error.
///
/// # Safety
/// `system` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shc_foliation_sample(
    system: *const ShcSystem,
    x: f64,
    y: f64,
    t0: f64,
    half_width: f64,
    step: f64,
    out: *mut ShcFoliation,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        let out = out_ptr(out, "out")?;
        let epoch = TimeEpoch::new(t0, half_width)?;
        let f = foliation_sample(&s.system, Vec2::new(x, y), &epoch, step)?;
        *out = ShcFoliation {
            fs: [f.f_s.x, f.f_s.y],
            fu: [f.f_u.x, f.f_u.y],
            theta: f.theta.unwrap_or(f64::NAN),
            signed_splitting: f.signed.unwrap_or(f64::NAN),
            sigma1_fwd: f.sigma1_fwd,
            sigma2_fwd: f.sigma2_fwd,
            sigma1_bwd: f.sigma1_bwd,
            sigma2_bwd: f.sigma2_bwd,
            degenerate: f.degenerate as c_int,
        };
        Ok(())
    })
}

/// Zero-splitting curves on an `nx × ny` grid over the system's domain.
/// `h ≤ 0` picks the continuation step from the grid.
///
/// # Safety
/// `system` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shc_zero_curves(
    system: *const ShcSystem,
    t0: f64,
    half_width: f64,
    nx: usize,
    ny: usize,
    step: f64,
    h: f64,
    out: *mut *mut ShcCurveSet,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        let out = out_ptr(out, "out")?;
        let epoch = TimeEpoch::new(t0, half_width)?;
        let grid = GridSpec::new(nx, ny, s.system.domain())?;
        let mut cfg = ContinuationConfig::for_grid(&grid);
        if h > 0.0 {
            cfg = ContinuationConfig { h_fd: cfg.h_fd, ..ContinuationConfig::with_step(h) };
        }
        let (curves, _) = find_zero_curves(&s.system, &epoch, &grid, step, &cfg)?;
        *out = Box::into_raw(Box::new(ShcCurveSet(curves)));
        Ok(())
    })
}

/// Number of curves in the set; 0 for null.
///
/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_set_len(set: *const ShcCurveSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Vertex count, closure flag and largest residual of curve `index`.
///
/// # Safety
/// `set` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_set_info(
    set: *const ShcCurveSet,
    index: usize,
    n_vertices: *mut usize,
    closed: *mut c_int,
    max_residual: *mut f64,
) -> ShcStatus {
    guard(|| {
        let c = curve_at(set, index)?;
        *out_ptr(n_vertices, "n_vertices")? = c.len();
        *out_ptr(closed, "closed")? = c.closed as c_int;
        *out_ptr(max_residual, "max_residual")? = c.max_residual();
        Ok(())
    })
}

/// Copy the vertices of curve `index` into `xy` (room for `capacity` points).
///
/// # Safety
/// `set` must be a live handle and `xy` must hold `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_set_vertices(
    set: *const ShcCurveSet,
    index: usize,
    xy: *mut f64,
    capacity: usize,
) -> ShcStatus {
    guard(|| copy_points(&curve_at(set, index)?.vertices, xy, capacity))
}

unsafe fn curve_at<'a>(set: *const ShcCurveSet, index: usize) -> Result<&'a ZeroCurve, Fail> {
    let s = as_ref(set, "set")?;
    s.0.get(index).ok_or_else(|| invalid(format!("curve index {index} out of range ({} curves)", s.0.len())))
}

unsafe fn copy_points(v: &[Vec2], xy: *mut f64, capacity: usize) -> Result<(), Fail> {
    if xy.is_null() {
        return Err(null("xy"));
    }
    if capacity < v.len() {
        return Err(Fail(ShcStatus::BufferTooSmall, format!("need room for {} points, got {capacity}", v.len())));
    }
    for (k, p) in v.iter().enumerate() {
        *xy.add(2 * k) = p.x;
        *xy.add(2 * k + 1) = p.y;
    }
    Ok(())
}

/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_set_free(set: *mut ShcCurveSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Curve from `n` interleaved points.
///
/// # Safety
/// `xy` must hold `2 * n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_new(xy: *const f64, n: usize, closed: c_int, out: *mut *mut ShcCurve) -> ShcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let curve = PlanarCurve::new(points(xy, n)?, closed != 0)?;
        *out = Box::into_raw(Box::new(ShcCurve(curve)));
        Ok(())
    })
}

/// Number of vertices; 0 for null.
///
/// # Safety
/// `curve` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_len(curve: *const ShcCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `curve` must be a live handle and `xy` must hold `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_vertices(curve: *const ShcCurve, xy: *mut f64, capacity: usize) -> ShcStatus {
    guard(|| copy_points(as_ref(curve, "curve")?.0.vertices(), xy, capacity))
}

/// Arc length, including the closing segment of closed curves.
///
/// # Safety
/// `curve` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_length(curve: *const ShcCurve, out: *mut f64) -> ShcStatus {
    guard(|| {
        *out_ptr(out, "out")? = as_ref(curve, "curve")?.0.length();
        Ok(())
    })
}

/// Curvature at `n` uniform arc-length samples, written to `kappa[n]`.
///
/// # Safety
/// `curve` must be a live handle and `kappa` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn shc_curvature_profile(curve: *const ShcCurve, n: usize, kappa: *mut f64) -> ShcStatus {
    guard(|| {
        let c = as_ref(curve, "curve")?;
        if kappa.is_null() {
            return Err(null("kappa"));
        }
        let p = curvature_profile(&c.0, n)?;
        std::slice::from_raw_parts_mut(kappa, n).copy_from_slice(&p.kappa);
        Ok(())
    })
}

/// Image of a curve from `t_a` to `t_b`, refined until neighbouring image
/// vertices are within `spacing_tol`.
///
/// # Safety
/// `system` and `curve` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shc_advect_curve(
    system: *const ShcSystem,
    curve: *const ShcCurve,
    t_a: f64,
    t_b: f64,
    step: f64,
    spacing_tol: f64,
    out: *mut *mut ShcCurve,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        let c = as_ref(curve, "curve")?;
        let out = out_ptr(out, "out")?;
        let image = advect_curve(&s.system, &c.0, t_a, t_b, step, spacing_tol)?;
        *out = Box::into_raw(Box::new(ShcCurve(image.curve)));
        Ok(())
    })
}

/// # Safety
/// `curve` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shc_curve_free(curve: *mut ShcCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Shape-coherence factor of closed curve `a` advected over
/// `[t0 − T, t0 + T]` against `b` (`a` itself when `b` is null).
///
/// # Safety
/// `system` and `a` must be live handles, `b` live or null, `out` valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn shc_alpha(
    system: *const ShcSystem,
    a: *const ShcCurve,
    b: *const ShcCurve,
    t0: f64,
    half_width: f64,
    step: f64,
    resolution: usize,
    n_angles: usize,
    out: *mut ShcCoherence,
) -> ShcStatus {
    guard(|| {
        let s = as_ref(system, "system")?;
        let a = as_ref(a, "a")?;
        let b = b.as_ref().map(|c| &c.0);
        let out = out_ptr(out, "out")?;
        let epoch = TimeEpoch { t0, half_width };
        let params = CoherenceParams { resolution, n_angles, step, spacing_tol: None };
        let r = alpha(&s.system, &a.0, b, &epoch, &params)?;
        *out = ShcCoherence {
            alpha: r.alpha,
            angle: r.best_motion.angle,
            tx: r.best_motion.translation.x,
            ty: r.best_motion.translation.y,
            intersect_area: r.intersect_area,
            area_b: r.area_b,
            under_resolved: r.under_resolved as c_int,
        };
        Ok(())
    })
}

//! Benchmark vector fields and fixed-step trajectory / Jacobian integration.
//!
//! Every system exposes its velocity and the analytic velocity gradient, so
//! flow-map Jacobians come from the variational equation `dJ/dt = ∇G·J`
//! integrated with the same RK4 stages as the trajectory.

use crate::{Error, Mat2, Result, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Seconds per day, used for Rossby-wave epochs quoted in days.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    DoubleGyre,
    RossbyWave,
    LinearSaddle,
    LinearRotationScaling,
    LinearShearA,
    LinearShearB,
}

impl SystemId {
    pub const ALL: [SystemId; 6] = [
        SystemId::DoubleGyre,
        SystemId::RossbyWave,
        SystemId::LinearSaddle,
        SystemId::LinearRotationScaling,
        SystemId::LinearShearA,
        SystemId::LinearShearB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::DoubleGyre => "double_gyre",
            SystemId::RossbyWave => "rossby_wave",
            SystemId::LinearSaddle => "linear_saddle",
            SystemId::LinearRotationScaling => "linear_rotation_scaling",
            SystemId::LinearShearA => "linear_shear_a",
            SystemId::LinearShearB => "linear_shear_b",
        }
    }

    /// Default parameter values, in declaration order.
    pub fn default_params(self) -> Vec<(&'static str, f64)> {
        match self {
            SystemId::DoubleGyre => vec![("A", 0.1), ("epsilon", 0.1), ("omega", 2.0 * PI / 10.0)],
            SystemId::RossbyWave => vec![
                ("U0", 63.66),
                ("c2_ratio", 0.205),
                ("c3_ratio", 0.7),
                ("A1", 0.075),
                ("A2", 0.4),
                ("A3", 0.2),
                ("L", 1.77e6),
                ("r_e", 6.371e6),
                ("sigma_ratio", (1.0 + 5f64.sqrt()) / 2.0),
            ],
            SystemId::LinearSaddle => vec![("lambda1", -1.0), ("lambda2", 1.0)],
            SystemId::LinearRotationScaling => {
                vec![("a", 1.5), ("b", 1.5), ("alpha", 0.2), ("beta", 0.2), ("tau", 1.0)]
            }
            SystemId::LinearShearA => vec![("a", 0.3), ("b", 0.3), ("tau", 1.0)],
            SystemId::LinearShearB => vec![("a", 0.1), ("b", 0.2), ("tau", 1.0)],
        }
    }

    /// Default RK4 step in system time units.
    pub fn default_step(self) -> f64 {
        match self {
            SystemId::RossbyWave => 100.0,
            _ => 1e-3,
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown system id '{s}'")))
    }
}

/// Axis-aligned box `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl DomainBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = DomainBox { x_min, x_max, y_min, y_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !all_finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::Config(format!("domain box {self:?} is empty or non-finite")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, z: Vec2) -> bool {
        z.x >= self.x_min && z.x <= self.x_max && z.y >= self.y_min && z.y <= self.y_max
    }
}

/// Finite time window `[t0 - T, t0 + T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeEpoch {
    pub t0: f64,
    #[serde(rename = "T")]
    pub half_width: f64,
}

impl TimeEpoch {
    pub fn new(t0: f64, half_width: f64) -> Result<Self> {
        let e = TimeEpoch { t0, half_width };
        e.validate()?;
        Ok(e)
    }

    /// Zero-width epoch at `t0`; only meaningful where advection is allowed
    /// to be the identity (coherence factors).
    pub fn identity(t0: f64) -> Self {
        TimeEpoch { t0, half_width: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() || !self.half_width.is_finite() || self.half_width <= 0.0 {
            return Err(Error::Config(format!(
                "epoch half-width T must be positive and finite, got {}",
                self.half_width
            )));
        }
        Ok(())
    }

    /// Like [`TimeEpoch::validate`] but accepts `T = 0`.
    pub fn validate_span(&self) -> Result<()> {
        if !self.t0.is_finite() || !self.half_width.is_finite() || self.half_width < 0.0 {
            return Err(Error::Config(format!(
                "epoch half-width T must be non-negative and finite, got {}",
                self.half_width
            )));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.t0 - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.half_width
    }
}

/// Endpoint of a trajectory together with the flow-map Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub point: Vec2,
    /// Row-major `∂(x₁,x₂)_out / ∂(x₁,x₂)_in`.
    pub jacobian: Mat2,
}

#[derive(Debug, Clone, Copy)]
struct RossbyModel {
    u0: f64,
    c3: f64,
    len: f64,
    a1: f64,
    a2: f64,
    a3: f64,
    k1: f64,
    k2: f64,
    sigma1: f64,
    sigma2: f64,
}

#[derive(Debug, Clone, Copy)]
enum Model {
    DoubleGyre {
        amp: f64,
        eps: f64,
        omega: f64,
    },
    Rossby(RossbyModel),
    Saddle {
        l1: f64,
        l2: f64,
    },
    /// Piecewise-constant generators: scaling then rotation forward in time,
    /// the mirrored pair backward in time.
    RotationScaling {
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        tau: f64,
    },
    ShearA {
        a: f64,
        b: f64,
        tau: f64,
    },
    ShearB {
        a: f64,
        b: f64,
        tau: f64,
    },
}

/// A named planar time-dependent vector field with its parameters and domain.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    id: SystemId,
    params: BTreeMap<String, f64>,
    domain: DomainBox,
    periodic_x: bool,
    breakpoints: Vec<f64>,
    model: Model,
}

impl FlowSystem {
    /// System with the default (published) parameters.
    pub fn new(id: SystemId) -> Self {
        Self::with_params(id, &BTreeMap::new()).expect("default parameters are valid")
    }

    /// System with selected parameters overridden. Unknown names are rejected.
    pub fn with_params(id: SystemId, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut params: BTreeMap<String, f64> =
            id.default_params().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::Config(format!("unknown parameter '{k}' for system {id}")));
                }
            }
        }
        if let Some((k, v)) = params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("parameter '{k}' = {v} is not finite")));
        }
        let p = |k: &str| params[k];
        let (model, domain, periodic_x, breakpoints) = match id {
            SystemId::DoubleGyre => (
                Model::DoubleGyre { amp: p("A"), eps: p("epsilon"), omega: p("omega") },
                DomainBox { x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 1.0 },
                false,
                vec![],
            ),
            SystemId::RossbyWave => {
                let (u0, r_e, len) = (p("U0"), p("r_e"), p("L"));
                if r_e <= 0.0 || len <= 0.0 {
                    return Err(Error::Config("r_e and L must be positive".into()));
                }
                let k1 = 2.0 / r_e;
                let k2 = 4.0 / r_e;
                let c2 = p("c2_ratio") * u0;
                let c3 = p("c3_ratio") * u0;
                let sigma2 = k2 * (c2 - c3);
                let model = RossbyModel {
                    u0,
                    c3,
                    len,
                    a1: p("A1"),
                    a2: p("A2"),
                    a3: p("A3"),
                    k1,
                    k2,
                    sigma1: p("sigma_ratio") * sigma2,
                    sigma2,
                };
                (
                    Model::Rossby(model),
                    DomainBox { x_min: 0.0, x_max: PI * r_e, y_min: -2.5e6, y_max: 2.5e6 },
                    true,
                    vec![],
                )
            }
            SystemId::LinearSaddle => (
                Model::Saddle { l1: p("lambda1"), l2: p("lambda2") },
                DomainBox { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 },
                false,
                vec![],
            ),
            SystemId::LinearRotationScaling | SystemId::LinearShearA | SystemId::LinearShearB => {
                let tau = p("tau");
                if tau <= 0.0 {
                    return Err(Error::Config("tau must be positive".into()));
                }
                let (a, b) = (p("a"), p("b"));
                let model = match id {
                    SystemId::LinearRotationScaling => {
                        if a <= 0.0 || b <= 0.0 {
                            return Err(Error::Config("rotation-scaling needs a > 0 and b > 0".into()));
                        }
                        Model::RotationScaling { a, b, alpha: p("alpha"), beta: p("beta"), tau }
                    }
                    SystemId::LinearShearA => Model::ShearA { a, b, tau },
                    _ => Model::ShearB { a, b, tau },
                };
                (
                    model,
                    DomainBox { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 },
                    false,
                    vec![-tau, -0.5 * tau, 0.0, 0.5 * tau, tau],
                )
            }
        };
        Ok(FlowSystem { id, params, domain, periodic_x, breakpoints, model })
    }

    /// Replace the domain box (used for grids restricted to a sub-region).
    pub fn with_domain(mut self, domain: DomainBox) -> Result<Self> {
        domain.validate()?;
        self.domain = domain;
        Ok(self)
    }

    pub fn id(&self) -> SystemId {
        self.id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown parameter '{name}' for system {}", self.id)))
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn periodic_x(&self) -> bool {
        self.periodic_x
    }

    /// Times at which the vector field is discontinuous; the integrator
    /// never steps across them.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Map `x` into the fundamental domain for periodic systems.
    pub fn wrap(&self, z: Vec2) -> Vec2 {
        if !self.periodic_x {
            return z;
        }
        let w = self.domain.width();
        let mut x = (z.x - self.domain.x_min).rem_euclid(w) + self.domain.x_min;
        if x >= self.domain.x_max {
            x = self.domain.x_min;
        }
        Vec2::new(x, z.y)
    }

    /// Displacement `b - a`, taking the shortest periodic image in x.
    pub fn delta(&self, a: Vec2, b: Vec2) -> Vec2 {
        let mut d = b - a;
        if self.periodic_x {
            let w = self.domain.width();
            d.x -= w * (d.x / w).round();
        }
        d
    }

    pub fn distance(&self, a: Vec2, b: Vec2) -> f64 {
        self.delta(a, b).norm()
    }

    /// The velocity `G(z, t)`.
    pub fn velocity(&self, z: Vec2, t: f64) -> Vec2 {
        self.eval(z, t, t).0
    }

    /// The spatial gradient `∇G(z, t)`, row-major `∂G_i/∂x_j`.
    pub fn velocity_gradient(&self, z: Vec2, t: f64) -> Mat2 {
        self.eval(z, t, t).1
    }

    /// The exact forward/backward transport matrices of the linear model
    /// flows over `[0, tau]` and `[0, -tau]`.
    pub fn linear_case(&self) -> Option<LinearCase> {
        match self.model {
            Model::RotationScaling { a, b, alpha, beta, .. } => Some(LinearCase::RotationScaling { a, b, alpha, beta }),
            Model::ShearA { a, b, .. } => Some(LinearCase::ShearA { a, b }),
            Model::ShearB { a, b, .. } => Some(LinearCase::ShearB { a, b }),
            _ => None,
        }
    }

    /// Velocity and gradient. `phase_t` selects the branch of piecewise
    /// fields; the integrator passes the midpoint of the current step.
    #[inline]
    fn eval(&self, z: Vec2, t: f64, phase_t: f64) -> (Vec2, Mat2) {
        match self.model {
            Model::DoubleGyre { amp, eps, omega } => {
                let s = eps * (omega * t).sin();
                let f = s * z.x * z.x + (1.0 - 2.0 * s) * z.x;
                let fx = 2.0 * s * z.x + 1.0 - 2.0 * s;
                let fxx = 2.0 * s;
                let (sf, cf) = (PI * f).sin_cos();
                let (sy, cy) = (PI * z.y).sin_cos();
                let pa = PI * amp;
                let vel = Vec2::new(-pa * sf * cy, pa * cf * sy * fx);
                let grad = Mat2::new(
                    -pa * PI * cf * fx * cy,
                    pa * PI * sf * sy,
                    pa * sy * (cf * fxx - PI * sf * fx * fx),
                    pa * PI * cf * cy * fx,
                );
                (vel, grad)
            }
            Model::Rossby(m) => {
                let th = (z.y / m.len).tanh();
                let sech2 = 1.0 - th * th;
                let ds = -2.0 / m.len * sech2 * th;
                let dds = 2.0 / (m.len * m.len) * sech2 * (3.0 * th * th - 1.0);
                let (s1, c1) = (m.k1 * z.x).sin_cos();
                let (s2, c2) = (m.k2 * z.x - m.sigma2 * t).sin_cos();
                let (s3, c3) = (m.k1 * z.x - m.sigma1 * t).sin_cos();
                let w = m.a3 * c1 + m.a2 * c2 + m.a1 * c3;
                let wx = -(m.a3 * m.k1 * s1 + m.a2 * m.k2 * s2 + m.a1 * m.k1 * s3);
                let wxx = -(m.a3 * m.k1 * m.k1 * c1 + m.a2 * m.k2 * m.k2 * c2 + m.a1 * m.k1 * m.k1 * c3);
                let ul = m.u0 * m.len;
                let vel = Vec2::new(-m.c3 + m.u0 * sech2 - ul * ds * w, ul * sech2 * wx);
                let grad = Mat2::new(-ul * ds * wx, m.u0 * ds - ul * dds * w, ul * sech2 * wxx, ul * ds * wx);
                (vel, grad)
            }
            Model::Saddle { l1, l2 } => (Vec2::new(l1 * z.x, l2 * z.y), Mat2::diag(l1, l2)),
            _ => {
                let g = self.linear_generator(phase_t);
                (g * z, g)
            }
        }
    }

    fn linear_generator(&self, t: f64) -> Mat2 {
        // Negative-time phases are traversed from 0 towards -τ, so each contributes
        // exp(-G·τ/2); the signs below make the product equal the backward matrix.
        match self.model {
            Model::RotationScaling { a, b, alpha, beta, tau } => {
                let half = 0.5 * tau;
                if t >= half {
                    Mat2::new(0.0, -alpha / half, alpha / half, 0.0)
                } else if t >= 0.0 {
                    let g = a.ln() / half;
                    Mat2::diag(g, -g)
                } else if t >= -half {
                    let g = -b.ln() / half;
                    Mat2::diag(g, -g)
                } else {
                    Mat2::new(0.0, beta / half, -beta / half, 0.0)
                }
            }
            Model::ShearA { a, b, tau } => {
                if t >= 0.0 {
                    Mat2::new(0.0, a / tau, 0.0, 0.0)
                } else {
                    Mat2::new(0.0, -b / tau, 0.0, 0.0)
                }
            }
            Model::ShearB { a, b, tau } => {
                if t >= 0.0 {
                    Mat2::new(0.0, 0.0, a / tau, 0.0)
                } else {
                    Mat2::new(0.0, -b / tau, 0.0, 0.0)
                }
            }
            _ => Mat2::ZERO,
        }
    }

    /// Split `[t_a, t_b]` at breakpoints, in travel order.
    fn segments(&self, t_a: f64, t_b: f64) -> Vec<(f64, f64)> {
        let (lo, hi) = if t_a <= t_b { (t_a, t_b) } else { (t_b, t_a) };
        let mut cuts: Vec<f64> = self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect();
        if t_b < t_a {
            cuts.reverse();
        }
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut s = t_a;
        for c in cuts {
            out.push((s, c));
            s = c;
        }
        out.push((s, t_b));
        out
    }
}

/// Step schedule for one segment: full steps of `step`, then a partial step
/// landing exactly on `t1`.
fn for_each_step(t0: f64, t1: f64, step: f64, mut f: impl FnMut(f64, f64) -> bool) -> bool {
    let span = t1 - t0;
    if span == 0.0 {
        return true;
    }
    let h = step.copysign(span);
    let ratio = span.abs() / step;
    let mut n_full = ratio.floor();
    let frac = ratio - n_full;
    // A remainder at round-off level is absorbed into the last full step.
    let partial = frac > 1e-9;
    if !partial && n_full == 0.0 {
        n_full = 1.0;
    }
    let n_full = n_full as u64;
    let n_total = n_full + u64::from(partial);
    for k in 0..n_total {
        let ta = t0 + k as f64 * h;
        let tb = if k + 1 == n_total { t1 } else { t0 + (k + 1) as f64 * h };
        if !f(ta, tb) {
            return false;
        }
    }
    true
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("integration step must be positive, got {step}")));
    }
    Ok(())
}

/// Trajectory endpoint without wrapping of periodic coordinates.
pub fn flow_map_unwrapped(system: &FlowSystem, z: Vec2, t_a: f64, t_b: f64, step: f64) -> Result<Vec2> {
    check_step(step)?;
    if !z.is_finite() || !t_a.is_finite() || !t_b.is_finite() {
        return Err(Error::Config("non-finite initial state or time".into()));
    }
    let mut state = z;
    let mut last_valid = t_a;
    for (s0, s1) in system.segments(t_a, t_b) {
        let ok = for_each_step(s0, s1, step, |ta, tb| {
            let h = tb - ta;
            let tm = 0.5 * (ta + tb);
            let k1 = system.eval(state, ta, tm).0;
            let k2 = system.eval(state + k1 * (0.5 * h), tm, tm).0;
            let k3 = system.eval(state + k2 * (0.5 * h), tm, tm).0;
            let k4 = system.eval(state + k3 * h, tb, tm).0;
            let next = state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if !next.is_finite() {
                return false;
            }
            state = next;
            last_valid = tb;
            true
        });
        if !ok {
            return Err(Error::Blowup { last_valid_time: last_valid });
        }
    }
    Ok(state)
}

/// `Φ(z; t_a → t_b)` by fixed-step classical RK4. Periodic coordinates are
/// wrapped on output only.
pub fn flow_map(system: &FlowSystem, z: Vec2, t_a: f64, t_b: f64, step: f64) -> Result<Vec2> {
    flow_map_unwrapped(system, z, t_a, t_b, step).map(|p| system.wrap(p))
}

/// Trajectory endpoint (unwrapped) and Jacobian `DΦ(z; t_a → t_b)`.
pub fn flow_jacobian_unwrapped(system: &FlowSystem, z: Vec2, t_a: f64, t_b: f64, step: f64) -> Result<Jet> {
    check_step(step)?;
    if !z.is_finite() || !t_a.is_finite() || !t_b.is_finite() {
        return Err(Error::Config("non-finite initial state or time".into()));
    }
    let mut p = z;
    let mut j = Mat2::IDENTITY;
    let mut last_valid = t_a;
    for (s0, s1) in system.segments(t_a, t_b) {
        let ok = for_each_step(s0, s1, step, |ta, tb| {
            let h = tb - ta;
            let tm = 0.5 * (ta + tb);
            let (k1, g1) = system.eval(p, ta, tm);
            let m1 = g1 * j;
            let (k2, g2) = system.eval(p + k1 * (0.5 * h), tm, tm);
            let m2 = g2 * (j + m1.scale(0.5 * h));
            let (k3, g3) = system.eval(p + k2 * (0.5 * h), tm, tm);
            let m3 = g3 * (j + m2.scale(0.5 * h));
            let (k4, g4) = system.eval(p + k3 * h, tb, tm);
            let m4 = g4 * (j + m3.scale(h));
            let np = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let nj = j + (m1 + m2.scale(2.0) + m3.scale(2.0) + m4).scale(h / 6.0);
            if !np.is_finite() || !nj.is_finite() {
                return false;
            }
            p = np;
            j = nj;
            last_valid = tb;
            true
        });
        if !ok {
            return Err(Error::Blowup { last_valid_time: last_valid });
        }
    }
    Ok(Jet { point: p, jacobian: j })
}

/// Trajectory endpoint and flow-map Jacobian over `[t_a, t_b]`.
pub fn flow_jacobian(system: &FlowSystem, z: Vec2, t_a: f64, t_b: f64, step: f64) -> Result<Jet> {
    let jet = flow_jacobian_unwrapped(system, z, t_a, t_b, step)?;
    Ok(Jet { point: system.wrap(jet.point), ..jet })
}

/// The linear model transformations used to study curvature evolution near
/// (non)hyperbolic points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum LinearCase {
    RotationScaling { a: f64, b: f64, alpha: f64, beta: f64 },
    ShearA { a: f64, b: f64 },
    ShearB { a: f64, b: f64 },
}

/// Forward transport `F_t` and backward transport `B_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMatrices {
    pub forward: Mat2,
    pub backward: Mat2,
}

impl LinearMatrices {
    /// `Q = B_t⁻¹ F_t`, the deformation over the whole epoch.
    pub fn q(&self) -> Result<Mat2> {
        let inv =
            self.backward.inverse().ok_or_else(|| Error::Parameter("backward transport matrix is singular".into()))?;
        Ok(inv * self.forward)
    }
}

pub fn linear_case_matrices(case: LinearCase) -> Result<LinearMatrices> {
    match case {
        LinearCase::RotationScaling { a, b, alpha, beta } => {
            if a == 0.0 || b == 0.0 {
                return Err(Error::Parameter("rotation-scaling requires a ≠ 0 and b ≠ 0".into()));
            }
            Ok(LinearMatrices {
                forward: Mat2::rotation(alpha) * Mat2::diag(a, 1.0 / a),
                backward: Mat2::rotation(beta) * Mat2::diag(b, 1.0 / b),
            })
        }
        LinearCase::ShearA { a, b } => {
            Ok(LinearMatrices { forward: Mat2::new(1.0, a, 0.0, 1.0), backward: Mat2::new(1.0, b, 0.0, 1.0) })
        }
        LinearCase::ShearB { a, b } => {
            Ok(LinearMatrices { forward: Mat2::new(1.0, 0.0, a, 1.0), backward: Mat2::new(1.0, b, 0.0, 1.0) })
        }
    }
}

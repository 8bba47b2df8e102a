//! Run configuration, commands and argument parsing for the `shapecoh` binary.
//!
//! A run is described by a JSON [`RunConfig`]. Command-line flags override
//! individual keys before anything is validated, and the resolved
//! configuration is echoed at the top of every output file.

use crate::coherence::{
    alpha, beta, coherence_bound, BoundParams, CoherenceParams, DEFAULT_ANGLES, DEFAULT_RESOLUTION,
};
use crate::curvegeom::{
    advect_curve, align_profiles, curvature_profile, profile_change, AdvectedCurve, CurvatureProfile, PlanarCurve,
};
use crate::flows::{DomainBox, FlowSystem, SystemId, TimeEpoch, SECONDS_PER_DAY};
use crate::foliations::{angle_field, angle_slice, count_dips, GridSpec};
use crate::zerocurves::{find_zero_curves, write_curves_csv, ContinuationConfig};
use crate::{Error, Result, Vec2};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit code for a failed command: 2 for bad input, 3 for numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() || matches!(e, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Unit of the epoch and slice times in a config file. Integrator steps are
/// always in the system's own unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// The system's own time unit (seconds for the Rossby wave).
    #[default]
    Model,
    Days,
}

impl TimeUnit {
    pub fn to_model(self, t: f64) -> f64 {
        match self {
            TimeUnit::Model => t,
            TimeUnit::Days => t * SECONDS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochConfig {
    pub t0: f64,
    #[serde(rename = "T")]
    pub half_width: f64,
    #[serde(default)]
    pub units: TimeUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Sub-box of the domain; the whole domain when omitted.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<DomainBox>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 200, ny: 100, bbox: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub resolution: usize,
    pub n_angles: usize,
    /// Image spacing target for curve advection; 1/1000 of the curve length
    /// when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_tol: Option<f64>,
    /// Number of sample times for β.
    pub n_times: usize,
    /// Boundary samples for the theorem bound.
    pub bound_samples: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            resolution: DEFAULT_RESOLUTION,
            n_angles: DEFAULT_ANGLES,
            spacing_tol: None,
            n_times: 11,
            bound_samples: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub n_samples: usize,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig { n_samples: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    pub n: usize,
    /// Epoch half-widths, in the epoch's units; `[T]` when empty.
    pub times: Vec<f64>,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig { y: None, x_range: None, n: 2000, times: Vec::new() }
    }
}

/// The on-disk run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemId,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub epoch: EpochConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// RK4 step in system time units; the system default when omitted.
    #[serde(default)]
    pub step: Option<f64>,
    /// Continuation settings layered over defaults derived from the grid.
    #[serde(default)]
    pub continuation: Map<String, Value>,
    #[serde(default)]
    pub coherence: CoherenceConfig,
    #[serde(default)]
    pub curvature: CurvatureConfig,
    #[serde(default)]
    pub slice: SliceConfig,
    /// Seed for random continuation candidates.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub system: SystemId,
    pub params: BTreeMap<String, f64>,
    pub epoch: EpochConfig,
    pub grid: GridSpec,
    pub step: f64,
    pub continuation: ContinuationConfig,
    pub coherence: CoherenceConfig,
    pub curvature: CurvatureConfig,
    pub slice: SliceConfig,
    /// Where outputs go; not part of the echoed header, so payloads do not
    /// depend on it.
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub flow: FlowSystem,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let flow = FlowSystem::with_params(self.system, &self.params)?;
        if self.epoch.units == TimeUnit::Days && self.system != SystemId::RossbyWave {
            return Err(Error::Config(format!("epoch.units 'days' only applies to rossby_wave, not {}", self.system)));
        }
        let model = self.model_epoch();
        if !(model.t0.is_finite() && model.half_width.is_finite() && model.half_width >= 0.0) {
            return Err(Error::Config(format!(
                "epoch.T must be non-negative and finite, got {}",
                self.epoch.half_width
            )));
        }
        let grid = GridSpec::new(self.grid.nx, self.grid.ny, self.grid.bbox.unwrap_or(flow.domain()))
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        let step = self.step.unwrap_or(self.system.default_step());
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {step}")));
        }
        let continuation = self.continuation(&grid)?;
        let c = &self.coherence;
        CoherenceParams { resolution: c.resolution, n_angles: c.n_angles, step, spacing_tol: c.spacing_tol }
            .validate()
            .map_err(|e| Error::Config(format!("coherence: {e}")))?;
        if c.n_times < 2 {
            return Err(Error::Config(format!("coherence.n_times must be ≥ 2, got {}", c.n_times)));
        }
        if c.bound_samples < 8 {
            return Err(Error::Config(format!("coherence.bound_samples must be ≥ 8, got {}", c.bound_samples)));
        }
        if self.curvature.n_samples < 8 {
            return Err(Error::Config(format!("curvature.n_samples must be ≥ 8, got {}", self.curvature.n_samples)));
        }
        if self.slice.n < 2 {
            return Err(Error::Config(format!("slice.n must be ≥ 2, got {}", self.slice.n)));
        }
        if let Some(t) = self.slice.times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("slice.times entries must be positive, got {t}")));
        }
        Ok(Resolved {
            system: self.system,
            params: flow.params().clone(),
            epoch: self.epoch,
            grid,
            step,
            continuation,
            coherence: self.coherence,
            curvature: self.curvature,
            slice: self.slice.clone(),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            flow,
        })
    }

    fn model_epoch(&self) -> TimeEpoch {
        let u = self.epoch.units;
        TimeEpoch { t0: u.to_model(self.epoch.t0), half_width: u.to_model(self.epoch.half_width) }
    }

    /// Grid-derived defaults, rescaled when `h` is given, then the explicit
    /// keys on top.
    fn continuation(&self, grid: &GridSpec) -> Result<ContinuationConfig> {
        let mut base = ContinuationConfig::for_grid(grid);
        if let Some(h) = self.continuation.get("h").and_then(Value::as_f64) {
            base = ContinuationConfig { h_fd: base.h_fd, ..ContinuationConfig::with_step(h) };
        }
        if let Some(seed) = self.seed {
            base.rng_seed = seed;
        }
        let mut merged = serde_json::to_value(base)?;
        if let Value::Object(m) = &mut merged {
            for (k, v) in &self.continuation {
                m.insert(k.clone(), v.clone());
            }
        }
        let cfg: ContinuationConfig =
            serde_json::from_value(merged).map_err(|e| Error::Config(format!("continuation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Resolved {
    /// Epoch in system time units.
    pub fn model_epoch(&self) -> TimeEpoch {
        let u = self.epoch.units;
        TimeEpoch { t0: u.to_model(self.epoch.t0), half_width: u.to_model(self.epoch.half_width) }
    }

    fn positive_epoch(&self) -> Result<TimeEpoch> {
        let e = self.model_epoch();
        if e.half_width <= 0.0 {
            return Err(Error::Config(format!(
                "epoch.T must be positive for this command, got {}",
                self.epoch.half_width
            )));
        }
        Ok(e)
    }

    fn coherence_params(&self) -> CoherenceParams {
        let c = &self.coherence;
        CoherenceParams { resolution: c.resolution, n_angles: c.n_angles, step: self.step, spacing_tol: c.spacing_tol }
    }

    fn header(&self, command: &str, args: Value) -> Value {
        json!({ "command": command, "config": self, "args": args })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        create_in(&self.output_dir, name)
    }
}

fn create_in(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(mut out: impl Write, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_curve(path: &Path, closed_default: bool) -> Result<PlanarCurve> {
    let file =
        File::open(path).map_err(|e| Error::Format(format!("cannot open curve file {}: {e}", path.display())))?;
    PlanarCurve::read_csv(BufReader::new(file), closed_default)
}

/// Load a config file (or start empty), apply flag overrides, validate.
pub fn load_config(args: &ConfigArgs) -> Result<Resolved> {
    let mut v = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)?
        }
        None => Value::Object(Map::new()),
    };
    args.apply(&mut v);
    let cfg: RunConfig = serde_json::from_value(v)?;
    cfg.resolve()
}

fn set(v: &mut Value, path: &[&str], x: Value) {
    let mut cur = v;
    for key in &path[..path.len() - 1] {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        cur = cur.as_object_mut().expect("object").entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    if !cur.is_object() {
        *cur = Value::Object(Map::new());
    }
    cur.as_object_mut().expect("object").insert(path[path.len() - 1].to_string(), x);
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Flags shared by every configured command; each overrides one config key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Run configuration file (JSON).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<SystemId>,
    /// Override a system parameter.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    /// Epoch half-width.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub half_width: Option<f64>,
    #[arg(long, value_enum)]
    pub units: Option<TimeUnit>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// RK4 step in system time units.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Raster pixels per side.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Rotation angles searched during registration.
    #[arg(long = "angles")]
    pub n_angles: Option<usize>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub eps3: Option<f64>,
    /// Continuation predictor step.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub h_fd: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub l_max: Option<f64>,
    #[arg(long)]
    pub closure_tol: Option<f64>,
    #[arg(long)]
    pub seed_dedupe_radius: Option<f64>,
    #[arg(long)]
    pub n_random: Option<usize>,
}

impl ConfigArgs {
    fn apply(&self, v: &mut Value) {
        if let Some(s) = self.system {
            set(v, &["system"], json!(s));
        }
        for (k, x) in &self.params {
            set(v, &["params", k], json!(x));
        }
        let floats = [
            (&["epoch", "t0"][..], self.t0),
            (&["epoch", "T"], self.half_width),
            (&["step"], self.step),
            (&["continuation", "eps1"], self.eps1),
            (&["continuation", "eps2"], self.eps2),
            (&["continuation", "eps3"], self.eps3),
            (&["continuation", "h"], self.h),
            (&["continuation", "h_fd"], self.h_fd),
            (&["continuation", "l_max"], self.l_max),
            (&["continuation", "closure_tol"], self.closure_tol),
            (&["continuation", "seed_dedupe_radius"], self.seed_dedupe_radius),
        ];
        for (path, x) in floats {
            if let Some(x) = x {
                set(v, path, json!(x));
            }
        }
        let ints = [
            (&["grid", "nx"][..], self.nx),
            (&["grid", "ny"], self.ny),
            (&["coherence", "resolution"], self.resolution),
            (&["coherence", "n_angles"], self.n_angles),
            (&["curvature", "n_samples"], self.n_samples),
            (&["continuation", "max_steps"], self.max_steps),
            (&["continuation", "n_random"], self.n_random),
        ];
        for (path, x) in ints {
            if let Some(x) = x {
                set(v, path, json!(x));
            }
        }
        if let Some(u) = self.units {
            set(v, &["epoch", "units"], json!(u));
        }
        if let Some(s) = self.seed {
            set(v, &["seed"], json!(s));
        }
        if let Some(d) = &self.output_dir {
            set(v, &["output_dir"], json!(d));
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "shapecoh", version, about = "Shape-coherent sets in planar nonautonomous flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Foliation angle field on the configured grid.
    Field(ConfigArgs),
    /// Zero-splitting curves: seeds, refinement, continuation.
    Zerocurves(ConfigArgs),
    /// Advect a curve and compare curvature profiles before and after.
    Advect(AdvectArgs),
    /// Curvature profile of a curve file.
    Curvature(CurvatureArgs),
    /// Shape-coherence factor α, or β with --throughout.
    Coherence(CoherenceArgs),
    /// Splitting angle along a horizontal line for one or more epochs.
    Slice(SliceArgs),
    /// List the built-in systems with their default parameters.
    Systems,
}

#[derive(Debug, Clone, Args)]
pub struct AdvectArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Curve CSV with x and y columns.
    #[arg(long)]
    pub curve: PathBuf,
    /// Start time in epoch units; the epoch start when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub ta: Option<f64>,
    /// End time in epoch units; the epoch end when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub tb: Option<f64>,
    /// Treat the curve as closed when its header does not say.
    #[arg(long)]
    pub closed: bool,
    /// Also advect a control copy of the curve translated by this much in x
    /// and report its length growth and curvature change alongside.
    #[arg(long, allow_negative_numbers = true)]
    pub control_shift: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long)]
    pub closed: bool,
    #[arg(short, long = "out", default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CoherenceArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Boundary of A (closed curve CSV).
    #[arg(long)]
    pub curve: PathBuf,
    /// Boundary of B; A itself when omitted.
    #[arg(long)]
    pub curve_b: Option<PathBuf>,
    /// Report β over the whole epoch instead of α at its end.
    #[arg(long)]
    pub throughout: bool,
    #[arg(long)]
    pub n_times: Option<usize>,
    /// Attach the boundary-regularity bound comparing A and B directly.
    #[arg(long)]
    pub bound: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SliceArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    /// Comma-separated epoch half-widths in epoch units.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
}

pub fn cmd_field(r: &Resolved) -> Result<Vec<String>> {
    let epoch = r.positive_epoch()?;
    let field = angle_field(&r.flow, &r.grid, &epoch, r.step)?;
    field.write_csv(r.create("field.csv")?, &r.header("field", json!({})))?;
    let below = field.count_below(r.continuation.eps1);
    let degenerate = field.samples.iter().filter(|s| s.degenerate).count();
    Ok(vec![format!(
        "field: {} nodes, {below} with θ < {}, {degenerate} degenerate",
        field.samples.len(),
        r.continuation.eps1
    )])
}

pub fn cmd_zerocurves(r: &Resolved) -> Result<Vec<String>> {
    let epoch = r.positive_epoch()?;
    let (curves, report) = find_zero_curves(&r.flow, &epoch, &r.grid, r.step, &r.continuation)?;
    let header = r.header("zerocurves", json!({}));
    write_json(r.create("curves.json")?, &json!({ "header": header, "report": report, "curves": curves }))?;
    write_curves_csv(r.create("curves.csv")?, &curves, &header)?;
    for (k, c) in curves.iter().enumerate() {
        // single-point curves (stalls at the domain edge) have no geometry
        let Ok(pc) = PlanarCurve::new(c.vertices.clone(), c.closed) else { continue };
        let h = json!({
            "closed": c.closed,
            "curve": k,
            "termination": c.termination,
            "max_residual": c.max_residual(),
            "header": header,
        });
        pc.write_csv(r.create(&format!("curve_{k:03}.csv"))?, &h)?;
    }
    let closed = curves.iter().filter(|c| c.closed).count();
    let max_res = curves.iter().map(|c| c.max_residual()).fold(0.0, f64::max);
    Ok(vec![
        format!("zero curves found: {} (closed loops: {closed}), max residual: {max_res:.3e}", curves.len()),
        format!(
            "seeds: {} candidates, {} traced, {} skipped near curves, {} refinement failures",
            report.candidates,
            report.seeds - report.skipped_near_curve - report.refinement_failures - report.trace_failures,
            report.skipped_near_curve,
            report.refinement_failures
        ),
    ])
}

pub fn cmd_advect(r: &Resolved, a: &AdvectArgs) -> Result<Vec<String>> {
    let curve = read_curve(&a.curve, a.closed)?;
    let epoch = r.model_epoch();
    let u = r.epoch.units;
    let t_a = a.ta.map_or(epoch.start(), |t| u.to_model(t));
    let t_b = a.tb.map_or(epoch.end(), |t| u.to_model(t));
    let (image, before, after, change) = advect_with_profiles(r, &curve, t_a, t_b)?;
    let aligned = match align_profiles(&before, &after) {
        Ok((shift, residual)) => Some((shift, residual)),
        Err(Error::LengthMismatch(..)) => None,
        Err(e) => return Err(e),
    };
    let control = match a.control_shift {
        Some(dx) => Some((dx, advect_with_profiles(r, &curve.map(|p| p + Vec2::new(dx, 0.0))?, t_a, t_b)?)),
        None => None,
    };
    let args = json!({
        "curve": a.curve,
        "t_a": t_a,
        "t_b": t_b,
        "closed": curve.closed(),
        "control_shift": a.control_shift,
    });
    let header = r.header("advect", args);
    let mut h = header.clone();
    h["closed"] = json!(image.curve.closed());
    h["under_resolved"] = json!(image.under_resolved);
    image.curve.write_csv(r.create("advected.csv")?, &h)?;
    before.write_csv(r.create("profile_before.csv")?, &header)?;
    after.write_csv(r.create("profile_after.csv")?, &header)?;
    let control_summary = match &control {
        Some((dx, (img, _, _, ch))) => {
            img.curve.write_csv(r.create("control_advected.csv")?, &header)?;
            json!({
                "shift": dx,
                "length_after": img.curve.length(),
                "profile_change": ch,
                "under_resolved": img.under_resolved,
            })
        }
        None => Value::Null,
    };
    let summary = json!({
        "header": header,
        "length_before": curve.length(),
        "length_after": image.curve.length(),
        "profile_change": change,
        "aligned_shift": aligned.map(|a| a.0),
        "aligned_residual": aligned.map(|a| a.1),
        "under_resolved": image.under_resolved,
        "control": control_summary,
    });
    write_json(r.create("advect.json")?, &summary)?;
    let mut lines = vec![format!(
        "advected {} vertices from t = {t_a} to t = {t_b}: length {:.6} → {:.6}",
        image.curve.len(),
        curve.length(),
        image.curve.length()
    )];
    lines.push(format!("curvature profile change (normalized arc length, sup norm): {change:.6e}"));
    lines.push(match aligned {
        Some((shift, res)) => format!("aligned curvature residual: {res:.6e} (shift {shift})"),
        None => "aligned curvature residual: n/a (arc lengths differ by more than 1%)".into(),
    });
    if image.under_resolved {
        lines.push("warning: image curve is under-resolved".into());
    }
    if let Some((dx, (img, _, _, ch))) = &control {
        lines.push(format!(
            "control shifted by {dx}: length growth {:.6} (curve {:.6}), curvature profile change {ch:.6e}",
            img.curve.length() / curve.length(),
            image.curve.length() / curve.length()
        ));
        if img.under_resolved {
            lines.push("warning: control image is under-resolved".into());
        }
    }
    Ok(lines)
}

type AdvectedProfiles = (AdvectedCurve, CurvatureProfile, CurvatureProfile, f64);

fn advect_with_profiles(r: &Resolved, curve: &PlanarCurve, t_a: f64, t_b: f64) -> Result<AdvectedProfiles> {
    let tol = r.coherence.spacing_tol.unwrap_or(curve.length() / 1000.0);
    let image = advect_curve(&r.flow, curve, t_a, t_b, r.step, tol)?;
    let n = r.curvature.n_samples;
    let before = curvature_profile(curve, n)?;
    let after = curvature_profile(&image.curve, n)?;
    let change = profile_change(&before, &after, n);
    Ok((image, before, after, change))
}

pub fn cmd_curvature(a: &CurvatureArgs) -> Result<Vec<String>> {
    let curve = read_curve(&a.curve, a.closed)?;
    let profile = curvature_profile(&curve, a.n)?;
    let header = json!({ "command": "curvature", "args": { "curve": a.curve, "n": a.n, "closed": curve.closed() } });
    profile.write_csv(create_in(&a.output_dir, "profile.csv")?, &header)?;
    Ok(vec![format!(
        "curvature profile: {} samples over length {:.6}, max κ {:.6}",
        profile.len(),
        profile.total_length,
        profile.max()
    )])
}

pub fn cmd_coherence(r: &Resolved, a: &CoherenceArgs) -> Result<Vec<String>> {
    let curve_a = read_curve(&a.curve, true)?;
    let curve_b = a.curve_b.as_deref().map(|p| read_curve(p, true)).transpose()?;
    let epoch = r.model_epoch();
    let params = r.coherence_params();
    let n_times = a.n_times.unwrap_or(r.coherence.n_times);
    let mut report = if a.throughout {
        beta(&r.flow, &curve_a, curve_b.as_ref(), &epoch, n_times, &params)?
    } else {
        alpha(&r.flow, &curve_a, curve_b.as_ref(), &epoch, &params)?
    };
    if a.bound {
        let bp = BoundParams {
            resolution: r.coherence.resolution,
            n_angles: r.coherence.n_angles,
            n_samples: r.coherence.bound_samples,
        };
        report.bound = Some(coherence_bound(&curve_a, curve_b.as_ref().unwrap_or(&curve_a), &bp)?);
    }
    let args = json!({
        "curve": a.curve,
        "curve_b": a.curve_b,
        "throughout": a.throughout,
        "n_times": n_times,
        "bound": a.bound,
    });
    let header = r.header("coherence", args);
    write_json(r.create("coherence.json")?, &json!({ "header": header, "report": report }))?;
    let name = if a.throughout { "beta" } else { "alpha" };
    let m = report.best_motion;
    let mut lines = vec![format!(
        "{name} = {:.6} at t = {} (overlap {:.6e} of area {:.6e}; rotation {:.6} rad, translation ({:.6e}, {:.6e}))",
        report.alpha, report.t_end, report.intersect_area, report.area_b, m.angle, m.translation.x, m.translation.y
    )];
    if let Some(b) = &report.bound {
        lines.push(format!("bound: {}", serde_json::to_string(b)?));
    }
    Ok(lines)
}

pub fn cmd_slice(r: &Resolved, a: &SliceArgs) -> Result<Vec<String>> {
    let y = a.y.or(r.slice.y).ok_or_else(|| Error::Config("slice.y is required (or pass --y)".into()))?;
    let times = if !a.times.is_empty() {
        a.times.clone()
    } else if !r.slice.times.is_empty() {
        r.slice.times.clone()
    } else {
        vec![r.epoch.half_width]
    };
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Config(format!("slice times must be positive, got {t}")));
    }
    let n = a.n.unwrap_or(r.slice.n);
    if n < 2 {
        return Err(Error::Config(format!("slice.n must be ≥ 2, got {n}")));
    }
    let d = r.grid.bbox;
    let [x0, x1] = r.slice.x_range.unwrap_or([d.x_min, d.x_max]);
    let x_range = (a.x_min.unwrap_or(x0), a.x_max.unwrap_or(x1));
    if !(x_range.0 < x_range.1) {
        return Err(Error::Config(format!("slice x range is empty: {x_range:?}")));
    }
    let u = r.epoch.units;
    let t0 = u.to_model(r.epoch.t0);
    let mut lines = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let epoch = TimeEpoch::new(t0, u.to_model(t))?;
        let slice = angle_slice(&r.flow, y, x_range, n, &epoch, r.step)?;
        let args = json!({ "y": y, "T": t, "n": n, "x_range": [x_range.0, x_range.1] });
        let mut out = r.create(&format!("slice_{k:02}.csv"))?;
        writeln!(out, "# {}", r.header("slice", args))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "theta"])?;
        for (x, theta) in &slice {
            w.write_record([x.to_string(), theta.map_or(String::new(), |v| v.to_string())])?;
        }
        w.flush()?;
        let min = slice.iter().filter_map(|s| s.1).fold(f64::INFINITY, f64::min);
        let dips = count_dips(&slice, r.continuation.eps1);
        lines.push(format!("T = {t}: min θ = {min:.6e}, dips below {} = {dips}", r.continuation.eps1));
    }
    Ok(lines)
}

/// One JSON object per built-in system.
pub fn cmd_systems() -> Result<Vec<String>> {
    SystemId::ALL
        .into_iter()
        .map(|id| {
            let sys = FlowSystem::new(id);
            let params: BTreeMap<&str, f64> = id.default_params().into_iter().collect();
            Ok(serde_json::to_string(&json!({
                "system": id,
                "domain": sys.domain(),
                "periodic_x": sys.periodic_x(),
                "default_step": id.default_step(),
                "params": params,
            }))?)
        })
        .collect()
}

/// Run one parsed command; returns the summary lines.
pub fn run(command: &Command) -> Result<Vec<String>> {
    match command {
        Command::Field(c) => cmd_field(&load_config(c)?),
        Command::Zerocurves(c) => cmd_zerocurves(&load_config(c)?),
        Command::Advect(a) => cmd_advect(&load_config(&a.config)?, a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Coherence(a) => cmd_coherence(&load_config(&a.config)?, a),
        Command::Slice(a) => cmd_slice(&load_config(&a.config)?, a),
        Command::Systems => cmd_systems(),
    }
}

/// Parse arguments, run, print; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{e}");
                EXIT_CONFIG
            } else {
                let _ = write!(out, "{e}");
                EXIT_OK
            };
        }
    };
    match run(&cli.command) {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

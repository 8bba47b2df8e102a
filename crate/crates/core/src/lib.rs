//! Shape-coherent sets in planar nonautonomous flows.
//!
//! The crate is organised as a pipeline:
//!
//! * [`flows`] defines the benchmark vector fields and integrates trajectories
//!   together with their flow-map Jacobians.
//! * [`foliations`] turns Jacobians into finite-time stable/unstable foliations
//!   and the splitting angle between them.
//! * [`zerocurves`] seeds, refines and continues curves along which the two
//!   foliations are tangent (zero splitting).
//! * [`curvegeom`] handles planar curves: arc-length resampling, discrete
//!   curvature, advection, Frenet reconstruction and the closed-form
//!   curvature-evolution formulas of the linear model flows.
//! * [`coherence`] rasterizes sets, registers them over rigid motions and
//!   reports the shape-coherence factors.
//! * [`cli`] holds the run configuration and the file formats used by the
//!   `shapecoh` binary.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Option::is_none_or` is newer than the minimum supported toolchain.
#![allow(clippy::unnecessary_map_or)]

pub mod cli;
pub mod coherence;
pub mod curvegeom;
mod error;
pub mod flows;
pub mod foliations;
pub mod linalg;
pub mod zerocurves;

pub use error::{Error, Result};
pub use linalg::{Mat2, Vec2};

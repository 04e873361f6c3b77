//! Numerical simulation of shifted inverse curvature flows of horo-convex
//! surfaces in hyperbolic space.
//!
//! The crate is organised by subsystem:
//!
//! - [`curvfun`]: catalog of symmetric, 1-homogeneous curvature functions with
//!   analytic derivatives and sampled certification of concavity properties.
//! - [`hypgeom`]: models of hyperbolic space, distances and sphere fitting.
//! - [`graphcurv`]: radial graphs over the sphere and their shifted principal
//!   curvatures, including the axisymmetric grid used by the solver.
//! - [`horosupport`]: horospherical support functions.
//! - [`flow`]: the rescaled flow solver, the exact spherical solution and
//!   asymptotic diagnostics.
//! - [`cexample`]: the quartic half-space patch that loses horo-convexity for
//!   powers `p > 1`.
//!
//! Per-cell loops run on rayon when the `parallel` feature is enabled (the
//! default); see [`exec::Exec`].

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror tensor notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cexample;
pub mod curvfun;
mod error;
pub mod exec;
pub mod flow;
pub mod graphcurv;
pub mod horosupport;
pub mod hypgeom;
pub mod numerics;

pub use error::{Error, Result};

//! Vorticity–temperature solver for the 2D Euler–Boussinesq system on
//! admissible polygons (all corner apertures at most a right angle), together
//! with the discrete elliptic, Orlicz-norm and estimate machinery used to
//! check the a-priori bounds of the continuous problem on computed runs.
//!
//! Layout:
//! - [`domain`]: polygons, aperture checks, structured triangulation,
//!   point location and piecewise-linear interpolation.
//! - [`field`]: nodal scalar, per-element vector and nodal tensor fields.
//! - [`elliptic`]: P1 Dirichlet/Neumann solves, Biot–Savart, lifting,
//!   Leray projection and derivative recovery.
//! - [`norms`]: discrete L^p, H¹ and Luxemburg norms plus inequality checks.
//! - [`boussinesq`]: initialization, splitting step and time loop.
//! - [`diagnostics`]: per-step norm series and CSV output.
//! - [`estimates`]: identity residuals, envelope calibration and sweeps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boussinesq;
pub mod diagnostics;
pub mod domain;
pub mod elliptic;
pub mod estimates;
pub mod expr;
pub mod field;
pub mod norms;
pub mod random;
pub mod sparse;
pub mod vtk;

mod error;

pub use error::{Error, Result};

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

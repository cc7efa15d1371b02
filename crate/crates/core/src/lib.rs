//! Data-driven robust one-step controllable (ROSC) sets for unknown
//! constrained linear systems, and the set-theoretic MPC built on them.
//!
//! The crate is generic over the floating-point scalar (see [`Real`]); the
//! aliases at the bottom of this file fix it to `f64`, which is what the
//! tolerances in the test-suite are calibrated for.
//!
//! Layout:
//! - [`setgeom`]: zonotopes, H-polytopes, matrix zonotopes.
//! - [`optim`]: dense LP / QP solvers, the weighted-log inner-zonotope
//!   program and the right pseudoinverse.
//! - [`sysid`]: data matrices and the matrix zonotope of consistent models.
//! - [`rosc`]: augmented ROSC assembly, inner approximation, family
//!   recursion and the exact model-based oracle.
//! - [`controller`]: online data-driven and model-based set-theoretic MPC.

// `!(a <= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
mod error;
pub mod linalg;
pub mod optim;
pub mod rosc;
mod scalar;
pub mod setgeom;
pub mod sysid;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default containment tolerance shared by all set-membership checks.
pub const DEFAULT_TOL: f64 = 1e-9;

pub type Zonotope = setgeom::Zonotope<f64>;
pub type HPolytope = setgeom::HPolytope<f64>;
pub type MatrixZonotope = setgeom::MatrixZonotope<f64>;
pub type VertexModels = setgeom::VertexModels<f64>;
pub type Trajectory = sysid::Trajectory<f64>;
pub type DataMatrices = sysid::DataMatrices<f64>;
pub type ModelSet = sysid::ModelSet<f64>;
pub type AugmentedRosc = rosc::AugmentedRosc<f64>;
pub type RoscFamily = rosc::RoscFamily<f64>;
pub type ControllerState = controller::ControllerState<f64>;
pub type ModelBasedController = controller::ModelBasedController<f64>;

pub type Zonotope32 = setgeom::Zonotope<f32>;
pub type HPolytope32 = setgeom::HPolytope<f32>;

//! Rigid body moving in an incompressible fluid, in the body frame.
//!
//! The crate covers the viscous system with Navier slip conditions through
//! a divergence-free Galerkin method, the inviscid system through vortex
//! particles coupled to the added-mass body equation, and harnesses for
//! the inviscid and infinite-inertia limits.

pub mod cli;
pub mod error;
pub mod euler;
pub mod fields;
pub mod forms;
pub mod geometry;
pub mod io;
pub mod kirchhoff;
pub mod motion;
pub mod studies;
pub mod viscous;

pub use error::{Error, Result};

/// Three-vector of `f64`.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix of `f64`; gradients are stored as `G[(i, k)] = ∂_k u_i`.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 6-vector `[ℓ; r]`.
pub type Vec6 = nalgebra::Vector6<f64>;
/// 6×6 matrix (added-mass tensors).
pub type Mat6 = nalgebra::Matrix6<f64>;

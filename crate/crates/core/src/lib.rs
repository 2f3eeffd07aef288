//! Floating-base rigid-body dynamics with centroidal quantities and a
//! numerical test for whether the centroidal frame is a function of the
//! configuration alone.
//!
//! Conventions shared by every module:
//! - 6D vectors are ordered linear part first, `(v; ω)` and `(f; τ)`.
//! - The base velocity `v` is the body (left-trivialized) velocity `^B v_{A,B}`.
//! - The configuration is `(H, s)` with `H = ^A H_B` and `s` the joint vector.

pub mod centroidal;
pub mod dynamics;
pub mod exec;
pub mod integrability;
pub mod kinematics;
pub mod lie;
pub mod model;
pub mod path;
pub mod spatial;

mod error;

pub use error::{Error, ModelError};
pub use model::{Model, State, VelocityState};
pub use spatial::{SpatialForce, SpatialInertia, SpatialMotion, Transform};

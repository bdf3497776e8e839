//! Online approximate-optimal path following for a kinematic unicycle.
//!
//! The vehicle error is expressed in a Serret-Frenet frame attached to a
//! virtual target whose progression law is singularity free. A
//! concurrent-learning actor-critic approximates the value function and the
//! optimal policy while the vehicle is running, and a trapezoidal
//! direct-collocation solver serves as an offline optimal-control reference.
//!
//! Module map:
//! - [`geometry`]: parametric paths, tangent/curvature, frame transforms.
//! - [`dynamics`]: control-affine error dynamics and unicycle kinematics.
//! - [`adp`]: basis, Bellman error, critic/actor update laws, diagnostics.
//! - [`sim`]: fixed-step RK4 closed-loop simulation and logging.
//! - [`baseline`]: direct-collocation oracle and trajectory comparison.

pub mod adp;
pub mod baseline;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod sim;

pub use error::{Error, Result};

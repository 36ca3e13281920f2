//! Sliding-mode sweep-coverage guidance for a constant-speed 3D unicycle.
//!
//! The robot spirals around a surface of revolution at a fixed horizontal
//! standoff, alternating upward and downward scan legs between two altitudes.
//!
//! - [`geometry`]: surface models, horizontal distance, turning-radius check
//! - [`frames`]: surface frame, second fundamental form, frame derivatives
//! - [`vehicle`]: unicycle integrator, observables, motion identities
//! - [`controller`]: three-mode hybrid guidance law
//! - [`tuning`]: controller parameter selection and certificate auditing
//! - [`analysis`]: scan legs, coverage, winding and safety metrics
//! - [`scenario`]: closed-loop runs and their output files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod scenario;
pub mod tuning;
pub mod vehicle;

pub use error::{Error, Result};
pub use geometry::Vec3;

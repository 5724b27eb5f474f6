//! Sparse-data nonrigid registration for linear-elastic bodies.
//!
//! Reconstructs volumetric deformation fields from sparse surface and point
//! data by fitting a linear combination of precomputed displacement modes
//! plus a rigid transform. Two interchangeable mode families are provided:
//!
//! - analytic regularized Kelvinlet fields ([`kelvinlet`]), which need no
//!   volumetric solve, and
//! - tetrahedral finite-element perturb-and-relax responses ([`fem`]).
//!
//! The reconstruction itself ([`libr`]) is shared between the two, so the
//! families can be compared head to head on accuracy and compute time.
//! [`synth`] generates ground-truth phantom cases for that comparison and
//! [`warp`] resamples volumetric images through a recovered field.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod kelvinlet;
pub mod libr;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};

/// 3D point or vector, in meters unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Dynamically sized column vector.
pub type DVec = nalgebra::DVector<f64>;
/// Dynamically sized matrix.
pub type DMat = nalgebra::DMatrix<f64>;

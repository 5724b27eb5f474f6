//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by mesh handling, solvers, registration, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("inverted tet {index}: signed volume {volume:.6e} m^3 is not positive")]
    InvertedTet { index: usize, volume: f64 },

    #[error("degenerate tet {index}: volume {volume:.6e} m^3 below threshold")]
    DegenerateTet { index: usize, volume: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("under-constrained system")]
    UnderConstrained,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular at load point")]
    SingularLoadPoint,

    #[error("incompressible limit unsupported: nu = {0} must satisfy 0 <= nu < 0.5")]
    IncompressibleLimit(f64),

    #[error("target {index} at ({x:.6}, {y:.6}, {z:.6}) lies outside the mesh")]
    TargetOutsideMesh { index: usize, x: f64, y: f64, z: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of numerical machinery (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnderConstrained
                | Error::Numerical(_)
                | Error::SingularLoadPoint
                | Error::DegenerateTet { .. }
        )
    }
}

//! File formats: VTK legacy ASCII meshes, CSV point data, a binary matrix
//! container for precomputed bases, raw volumes, case directories, and
//! registration-state JSON.
//!
//! Floating-point values in text formats are written with Rust's shortest
//! round-trip formatting, so write -> read -> re-write is byte-identical.

mod case;
mod csvio;
mod matbin;
mod state;
mod vtk;
mod volume;

pub use case::{displacement_as_vectors, read_case_dir, write_case_dir, CaseJson, FeatureJson};
pub use csvio::{
    read_point_cloud_csv, read_targets_csv, write_point_cloud_csv, write_targets_csv,
};
pub use matbin::{read_matrices, write_matrices};
pub use state::{read_state_json, write_state_json, StateJson};
pub use vtk::{read_field_vtk, read_mesh_vtk, write_field_vtk, write_mesh_vtk};
pub use volume::{read_volume, write_volume, Volume, VolumeHeader};

//! Volumetric image warping through a mesh-interpolated displacement field.
//!
//! The displacement maps undeformed points to deformed ones, so resampling
//! is done by inverse mapping: each output voxel center x is traced back to
//! its source location y solving y + u(y) = x by fixed-point iteration, and
//! the input volume is sampled there by trilinear interpolation. Voxels
//! outside the mesh pass through unchanged.

use rayon::prelude::*;

use crate::geometry::{TetLocator, TetMesh};
use crate::io::Volume;
use crate::{Result, Vec3};

/// Convergence tolerance of the inverse fixed-point iteration, meters.
pub const INVERSE_TOL: f64 = 1e-6;
/// Iteration cap of the inverse fixed-point iteration.
pub const INVERSE_MAX_ITERS: usize = 20;

/// Warps `volume` by the nodal `displacement` field living on `mesh`.
pub fn warp_volume(volume: &Volume, mesh: &TetMesh, displacement: &[Vec3]) -> Result<Volume> {
    if displacement.len() != mesh.node_count() {
        return Err(crate::Error::DimensionMismatch(format!(
            "{} displacement vectors for {} nodes",
            displacement.len(),
            mesh.node_count()
        )));
    }
    let locator = TetLocator::build(mesh);
    let [nx, ny, nz] = volume.dims;
    let mut data = vec![0.0f32; nx * ny * nz];

    data.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(k, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let x = volume.voxel_center(i, j, k);
                    slab[j * nx + i] = match locator.interpolate(&x, displacement) {
                        None => volume.at(i, j, k),
                        Some(u0) => {
                            // y_{n+1} = x - u(y_n), starting from y_0 = x.
                            let mut y = x - u0;
                            for _ in 1..INVERSE_MAX_ITERS {
                                let u = match locator.interpolate(&y, displacement) {
                                    Some(u) => u,
                                    None => break,
                                };
                                let y_next = x - u;
                                let step = (y_next - y).norm();
                                y = y_next;
                                if step < INVERSE_TOL {
                                    break;
                                }
                            }
                            volume.sample_trilinear(&y)
                        }
                    };
                }
            }
        });

    Volume::new(volume.dims, volume.spacing, volume.origin, data)
}

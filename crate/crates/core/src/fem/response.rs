//! Strain and stress response matrices paired with a displacement basis.
//!
//! The same code path serves both displacement models; only the supplied
//! basis differs. Rows are per-element (6 Voigt components per tet) and
//! scaled by sqrt(element volume), so the Gram matrix J_strain^T J_stress
//! turns basis weights into the exact strain-stress energy integral of the
//! reconstructed field.

use rayon::prelude::*;

use crate::fem::{element_b_matrix_indexed, ElementStrainOperator, MaterialMatrix};
use crate::geometry::TetMesh;
use crate::{DMat, Error, Result};

/// Displacement, strain, and stress responses of one basis (3k columns).
pub struct ResponseMatrices {
    /// 3M x 3k nodal displacement response.
    pub j_u: DMat,
    /// 6T x 3k volume-weighted per-element strain response.
    pub j_strain: DMat,
    /// 6T x 3k volume-weighted per-element stress response.
    pub j_stress: DMat,
    gram: DMat,
}

impl ResponseMatrices {
    /// Number of basis columns (3k).
    pub fn mode_count(&self) -> usize {
        self.j_u.ncols()
    }

    /// Node count M of the underlying mesh.
    pub fn node_count(&self) -> usize {
        self.j_u.nrows() / 3
    }

    /// Precomputed J_strain^T J_stress (3k x 3k), the energy Gram matrix.
    pub fn gram(&self) -> &DMat {
        &self.gram
    }

    /// A zero-mode response for the given mesh: rigid-only registrations
    /// optimize over [tau, theta] alone by passing this.
    pub fn empty(mesh: &crate::geometry::TetMesh) -> Self {
        let rows = 3 * mesh.node_count();
        let strain_rows = 6 * mesh.tet_count();
        Self {
            j_u: DMat::zeros(rows, 0),
            j_strain: DMat::zeros(strain_rows, 0),
            j_stress: DMat::zeros(strain_rows, 0),
            gram: DMat::zeros(0, 0),
        }
    }

    /// Rebuilds a ResponseMatrices from its parts, recomputing the Gram
    /// matrix (used by deserialization).
    pub fn from_parts(j_u: DMat, j_strain: DMat, j_stress: DMat) -> Result<Self> {
        if j_strain.shape() != j_stress.shape() || j_strain.ncols() != j_u.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "j_u {:?}, j_strain {:?}, j_stress {:?}",
                j_u.shape(),
                j_strain.shape(),
                j_stress.shape()
            )));
        }
        let gram = j_strain.tr_mul(&j_stress);
        Ok(Self {
            j_u,
            j_strain,
            j_stress,
            gram,
        })
    }
}

/// Builds per-element strain/stress responses for every column of `j_u`.
pub fn response_matrices(
    mesh: &TetMesh,
    j_u: DMat,
    material: &MaterialMatrix,
) -> Result<ResponseMatrices> {
    let n_modes = j_u.ncols();
    if n_modes % 3 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "basis has {n_modes} columns, expected a multiple of 3"
        )));
    }
    if j_u.nrows() != 3 * mesh.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows for a mesh with {} nodes",
            j_u.nrows(),
            mesh.node_count()
        )));
    }
    let n_tets = mesh.tet_count();
    let ops: Vec<ElementStrainOperator> = mesh
        .tets()
        .iter()
        .enumerate()
        .map(|(ti, tet)| {
            let verts = [
                mesh.nodes()[tet[0]],
                mesh.nodes()[tet[1]],
                mesh.nodes()[tet[2]],
                mesh.nodes()[tet[3]],
            ];
            element_b_matrix_indexed(&verts, ti)
        })
        .collect::<Result<_>>()?;

    let rows = 6 * n_tets;
    let mut strain_data = vec![0.0f64; rows * n_modes];
    let mut stress_data = vec![0.0f64; rows * n_modes];
    let tets = mesh.tets();
    let d = material.matrix();

    strain_data
        .par_chunks_mut(rows)
        .zip(stress_data.par_chunks_mut(rows))
        .enumerate()
        .for_each(|(j, (strain_col, stress_col))| {
            let col = j_u.column(j);
            let mut u = nalgebra::SVector::<f64, 12>::zeros();
            for (ti, tet) in tets.iter().enumerate() {
                for (a, &node) in tet.iter().enumerate() {
                    u[3 * a] = col[3 * node];
                    u[3 * a + 1] = col[3 * node + 1];
                    u[3 * a + 2] = col[3 * node + 2];
                }
                let op = &ops[ti];
                let sqrt_v = op.volume.sqrt();
                let strain = op.b * u * sqrt_v;
                let stress = d * strain;
                for c in 0..6 {
                    strain_col[6 * ti + c] = strain[c];
                    stress_col[6 * ti + c] = stress[c];
                }
            }
        });

    let j_strain = DMat::from_vec(rows, n_modes, strain_data);
    let j_stress = DMat::from_vec(rows, n_modes, stress_data);
    let gram = j_strain.tr_mul(&j_stress);
    Ok(ResponseMatrices {
        j_u,
        j_strain,
        j_stress,
        gram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::isotropic_material_matrix;
    use crate::geometry::TetMesh;
    use crate::{DVec, Vec3};

    fn single_tet_mesh() -> TetMesh {
        TetMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn uniform_translation_mode_has_zero_strain() {
        let mesh = single_tet_mesh();
        let material = isotropic_material_matrix(2100.0, 0.45).unwrap();
        let mut j_u = DMat::zeros(12, 3);
        for node in 0..4 {
            for c in 0..3 {
                j_u[(3 * node + c, c)] = 1.0;
            }
        }
        let resp = response_matrices(&mesh, j_u, &material).unwrap();
        assert!(resp.j_strain.amax() < 1e-10);
        let alpha = DVec::from_vec(vec![1.0, -2.0, 0.5]);
        let energy = (resp.gram() * &alpha).dot(&alpha);
        assert!(energy.abs() < 1e-10);
    }

    #[test]
    fn uniaxial_mode_energy_integrand_is_d11_volume() {
        let mesh = single_tet_mesh();
        let material = isotropic_material_matrix(2100.0, 0.45).unwrap();
        // One mode: u = (x, 0, 0) sampled at the nodes.
        let mut j_u = DMat::zeros(12, 3);
        for (node, p) in mesh.nodes().iter().enumerate() {
            j_u[(3 * node, 0)] = p.x;
        }
        let resp = response_matrices(&mesh, j_u, &material).unwrap();
        let alpha = DVec::from_vec(vec![1.0, 0.0, 0.0]);
        let energy = (resp.gram() * &alpha).dot(&alpha);
        let volume = mesh.volume();
        let d11 = material.matrix()[(0, 0)];
        assert!(
            (energy - d11 * volume).abs() < 1e-10 * d11 * volume,
            "energy {energy} vs {}",
            d11 * volume
        );
    }

    #[test]
    fn gram_is_psd_on_random_weights() {
        let mesh = single_tet_mesh();
        let material = isotropic_material_matrix(2100.0, 0.45).unwrap();
        let mut j_u = DMat::zeros(12, 6);
        let mut s = 1.0_f64;
        for v in j_u.iter_mut() {
            s = (s * 9301.0 + 49297.0) % 233280.0;
            *v = s / 233280.0 - 0.5;
        }
        let resp = response_matrices(&mesh, j_u, &material).unwrap();
        for trial in 0..100 {
            let mut alpha = DVec::zeros(6);
            for (i, a) in alpha.iter_mut().enumerate() {
                s = (s * 9301.0 + 49297.0 + trial as f64 + i as f64) % 233280.0;
                *a = s / 233280.0 - 0.5;
            }
            let e = (resp.gram() * &alpha).dot(&alpha);
            assert!(e >= -1e-12, "negative energy {e} at trial {trial}");
        }
    }
}

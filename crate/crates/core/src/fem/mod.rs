//! Linear-elastic tetrahedral finite elements: assembly, constrained solves,
//! the perturb-and-relax control-point basis, and the strain/stress response
//! machinery shared by both displacement models.

mod basis;
mod response;
mod stiffness;

pub use basis::{build_fem_basis, perturb_and_relax, PerturbOptions};
pub use response::{response_matrices, ResponseMatrices};
pub use stiffness::{
    assemble_stiffness, solve_displacement, solve_self_equilibrated, DirichletSolver, Solution,
    StiffnessSystem,
};

use nalgebra::{SMatrix, SVector};

use crate::{Error, Result, Vec3};

/// Voigt order used throughout: (exx, eyy, ezz, gxy, gyz, gzx) with
/// engineering shear strains.
pub type Strain = SVector<f64, 6>;
/// 6x6 isotropic elasticity matrix wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMatrix {
    d: SMatrix<f64, 6, 6>,
}

impl MaterialMatrix {
    pub fn matrix(&self) -> &SMatrix<f64, 6, 6> {
        &self.d
    }
}

/// Isotropic Hooke matrix from (E, nu) via the Lame constants.
pub fn isotropic_material_matrix(youngs_modulus: f64, poisson_ratio: f64) -> Result<MaterialMatrix> {
    if !(youngs_modulus > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Young's modulus {youngs_modulus} must be positive"
        )));
    }
    if !(0.0..0.5).contains(&poisson_ratio) {
        return Err(Error::IncompressibleLimit(poisson_ratio));
    }
    let lambda =
        youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    let mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    Ok(MaterialMatrix { d })
}

/// Constant strain-displacement operator of one linear tet.
#[derive(Debug, Clone)]
pub struct ElementStrainOperator {
    /// 6x12 matrix mapping the stacked nodal displacement (u0,v0,w0,...,w3)
    /// to Voigt strain.
    pub b: SMatrix<f64, 6, 12>,
    /// Element volume in m^3.
    pub volume: f64,
}

/// Builds the strain-displacement matrix and volume of a linear tet.
///
/// Shape-function gradients come from inverting the edge matrix, so strains
/// of affine displacement fields are reproduced exactly.
pub fn element_b_matrix(verts: &[Vec3; 4]) -> Result<ElementStrainOperator> {
    element_b_matrix_indexed(verts, 0)
}

/// As `element_b_matrix`, reporting `tet_index` in degenerate-element errors.
pub fn element_b_matrix_indexed(
    verts: &[Vec3; 4],
    tet_index: usize,
) -> Result<ElementStrainOperator> {
    let e1 = verts[1] - verts[0];
    let e2 = verts[2] - verts[0];
    let e3 = verts[3] - verts[0];
    let det = e1.dot(&e2.cross(&e3));
    let volume = det / 6.0;
    if volume < crate::geometry::DEGENERATE_VOLUME {
        return Err(Error::DegenerateTet {
            index: tet_index,
            volume,
        });
    }
    // Rows of the inverse edge matrix are the gradients of the barycentric
    // coordinates of vertices 1..3; vertex 0's gradient closes the partition
    // of unity.
    let m = crate::Mat3::from_columns(&[e1, e2, e3]);
    let inv = m
        .try_inverse()
        .ok_or(Error::DegenerateTet {
            index: tet_index,
            volume,
        })?;
    let mut grads = [Vec3::zeros(); 4];
    for i in 0..3 {
        grads[i + 1] = Vec3::new(inv[(i, 0)], inv[(i, 1)], inv[(i, 2)]);
    }
    grads[0] = -(grads[1] + grads[2] + grads[3]);

    let mut b = SMatrix::<f64, 6, 12>::zeros();
    for (n, g) in grads.iter().enumerate() {
        let c = 3 * n;
        b[(0, c)] = g.x;
        b[(1, c + 1)] = g.y;
        b[(2, c + 2)] = g.z;
        // engineering shear: gxy = du/dy + dv/dx, etc.
        b[(3, c)] = g.y;
        b[(3, c + 1)] = g.x;
        b[(4, c + 1)] = g.z;
        b[(4, c + 2)] = g.y;
        b[(5, c)] = g.z;
        b[(5, c + 2)] = g.x;
    }
    Ok(ElementStrainOperator { b, volume })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SVector;

    fn tet() -> [Vec3; 4] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]
    }

    fn nodal_vector(verts: &[Vec3; 4], field: impl Fn(&Vec3) -> Vec3) -> SVector<f64, 12> {
        let mut u = SVector::<f64, 12>::zeros();
        for (i, v) in verts.iter().enumerate() {
            let d = field(v);
            u[3 * i] = d.x;
            u[3 * i + 1] = d.y;
            u[3 * i + 2] = d.z;
        }
        u
    }

    #[test]
    fn rigid_translation_gives_zero_strain() {
        let verts = tet();
        let op = element_b_matrix(&verts).unwrap();
        let u = nodal_vector(&verts, |_| Vec3::new(0.3, -1.2, 7.0));
        let s = op.b * u;
        assert!(s.amax() < 1e-12);
    }

    #[test]
    fn unit_uniaxial_strain() {
        let verts = tet();
        let op = element_b_matrix(&verts).unwrap();
        let u = nodal_vector(&verts, |p| Vec3::new(p.x, 0.0, 0.0));
        let s = op.b * u;
        let expect = Strain::from_row_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((s - expect).amax() < 1e-12);
    }

    #[test]
    fn degenerate_tet_errors_with_index() {
        let verts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
        ];
        match element_b_matrix_indexed(&verts, 17) {
            Err(Error::DegenerateTet { index: 17, .. }) => {}
            other => panic!("expected DegenerateTet, got {other:?}"),
        }
    }

    #[test]
    fn material_matrix_nu_zero_is_diagonal_blocks() {
        let m = isotropic_material_matrix(2100.0, 0.0).unwrap();
        let d = m.matrix();
        assert!((d[(0, 0)] - 2100.0).abs() < 1e-9);
        assert_eq!(d[(0, 1)], 0.0);
        assert!((d[(3, 3)] - 1050.0).abs() < 1e-9);
    }

    #[test]
    fn material_matrix_is_spd() {
        let m = isotropic_material_matrix(2100.0, 0.45).unwrap();
        let d = nalgebra::DMatrix::from_iterator(6, 6, m.matrix().iter().copied());
        assert!((&d - d.transpose()).amax() < 1e-12 * d.amax());
        assert!(nalgebra::Cholesky::new(d).is_some());
    }
}

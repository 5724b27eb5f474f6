//! Singular and regularized Kelvinlet displacement fields and the
//! regularized-Kelvinlet displacement basis.
//!
//! A Kelvinlet is the Green's-function response of an infinite linear-elastic
//! medium to a point force. The regularized variant smooths the force over a
//! radial density of scale `epsilon`, giving a field that is finite
//! everywhere, including at the load point. Both depend on material only
//! through the coefficients `a = (1+nu)/(2*pi*E)` and `b = a/(4*(1-nu))`.

use rayon::prelude::*;

use crate::geometry::{ControlPointSet, TetMesh};
use crate::{DMat, DVec, Error, Result, Vec3};

/// Isotropic elastic material for Kelvinlet evaluation.
///
/// The derived coefficients are recomputed from (E, nu) on every access so
/// they can never go stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    youngs_modulus: f64,
    poisson_ratio: f64,
}

impl ElasticParams {
    /// E in pascals, nu dimensionless in [0, 0.5).
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Young's modulus {youngs_modulus} must be positive"
            )));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(Error::IncompressibleLimit(poisson_ratio));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    /// a = (1 + nu) / (2 pi E), in m/N.
    pub fn coefficient_a(&self) -> f64 {
        (1.0 + self.poisson_ratio) / (2.0 * std::f64::consts::PI * self.youngs_modulus)
    }

    /// b = a / (4 (1 - nu)).
    pub fn coefficient_b(&self) -> f64 {
        self.coefficient_a() / (4.0 * (1.0 - self.poisson_ratio))
    }

    /// Lame constants (lambda, mu) in pascals.
    pub fn lame_constants(&self) -> (f64, f64) {
        let e = self.youngs_modulus;
        let nu = self.poisson_ratio;
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

/// The (a, b) coefficient pair for a material.
pub fn elastic_coefficients(youngs_modulus: f64, poisson_ratio: f64) -> Result<(f64, f64)> {
    let p = ElasticParams::new(youngs_modulus, poisson_ratio)?;
    Ok((p.coefficient_a(), p.coefficient_b()))
}

/// A regularized point load: location, force vector, and radial scale.
#[derive(Debug, Clone, Copy)]
pub struct KelvinletLoad {
    pub location: Vec3,
    pub force: Vec3,
    pub epsilon: f64,
}

impl KelvinletLoad {
    pub fn new(location: Vec3, force: Vec3, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {epsilon} must be positive"
            )));
        }
        Ok(Self {
            location,
            force,
            epsilon,
        })
    }
}

/// Singular Kelvinlet displacement u(r) = [(a-b)/r I + b/r^3 r r^T] f.
///
/// Undefined at the load point itself.
pub fn kelvinlet_displacement(r: &Vec3, force: &Vec3, params: &ElasticParams) -> Result<Vec3> {
    let dist = r.norm();
    if dist == 0.0 {
        return Err(Error::SingularLoadPoint);
    }
    let a = params.coefficient_a();
    let b = params.coefficient_b();
    Ok(force * ((a - b) / dist) + r * (b / (dist * dist * dist) * r.dot(force)))
}

/// Normalized force density rho_eps(r) = 15 eps^4 / (8 pi r_eps^7), in 1/m^3,
/// with r_eps = sqrt(r^2 + eps^2).
pub fn regularized_density(r: f64, epsilon: f64) -> f64 {
    let r_eps = (r * r + epsilon * epsilon).sqrt();
    15.0 * epsilon.powi(4) / (8.0 * std::f64::consts::PI * r_eps.powi(7))
}

/// Regularized Kelvinlet displacement
/// u_eps(r) = [(a-b)/r_eps I + b/r_eps^3 r r^T + a eps^2 / (2 r_eps^3) I] f,
/// finite everywhere including r = 0.
pub fn regularized_kelvinlet(r: &Vec3, load: &KelvinletLoad, params: &ElasticParams) -> Vec3 {
    let a = params.coefficient_a();
    let b = params.coefficient_b();
    let eps = load.epsilon;
    let r_eps = (r.norm_squared() + eps * eps).sqrt();
    let r_eps3 = r_eps * r_eps * r_eps;
    let iso = (a - b) / r_eps + a * eps * eps / (2.0 * r_eps3);
    load.force * iso + r * (b / r_eps3 * r.dot(&load.force))
}

/// Regularized Kelvinlet field evaluated at a world point `x`; the field
/// depends on `x` only through r = x - x0.
pub fn rk_field_at(x: &Vec3, load: &KelvinletLoad, params: &ElasticParams) -> Vec3 {
    regularized_kelvinlet(&(x - load.location), load, params)
}

/// Stacks u_eps(x_m - x0) over every mesh node, 3 components per node, into
/// a displacement vector of length 3M.
pub fn rk_basis_vector(mesh: &TetMesh, load: &KelvinletLoad, params: &ElasticParams) -> DVec {
    let mut d = DVec::zeros(3 * mesh.node_count());
    fill_rk_column(mesh.nodes(), load, params, d.as_mut_slice());
    d
}

fn fill_rk_column(nodes: &[Vec3], load: &KelvinletLoad, params: &ElasticParams, out: &mut [f64]) {
    for (m, x) in nodes.iter().enumerate() {
        let u = rk_field_at(x, load, params);
        out[3 * m] = u.x;
        out[3 * m + 1] = u.y;
        out[3 * m + 2] = u.z;
    }
}

/// Builds the 3M x 3k regularized-Kelvinlet displacement response matrix.
///
/// Columns are ordered (cp 0, x), (cp 0, y), (cp 0, z), (cp 1, x), ... with a
/// unit 1 N force along the axis at each control point. Columns are
/// independent and computed in parallel, each written once to its own
/// storage.
pub fn build_rk_basis(
    mesh: &TetMesh,
    cps: &ControlPointSet,
    epsilon: f64,
    params: &ElasticParams,
) -> Result<DMat> {
    if cps.is_empty() {
        return Err(Error::InvalidParameter("empty control point set".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    let rows = 3 * mesh.node_count();
    let cols = 3 * cps.len();
    let mut data = vec![0.0f64; rows * cols];
    let nodes = mesh.nodes();
    data.par_chunks_mut(rows).enumerate().for_each(|(j, col)| {
        let cp = j / 3;
        let axis = j % 3;
        let mut force = Vec3::zeros();
        force[axis] = 1.0;
        let load = KelvinletLoad {
            location: cps.positions()[cp],
            force,
            epsilon,
        };
        fill_rk_column(nodes, &load, params, col);
    });
    Ok(DMat::from_vec(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn liver() -> ElasticParams {
        ElasticParams::new(2100.0, 0.45).unwrap()
    }

    #[test]
    fn coefficient_ratio_identity() {
        for (e, nu) in [(2100.0, 0.45), (1.0, 0.0), (5e4, 0.3), (900.0, 0.25)] {
            let (a, b) = elastic_coefficients(e, nu).unwrap();
            assert!(a > b && b > 0.0);
            assert!((a / b - 4.0 * (1.0 - nu)).abs() < 1e-12 * 4.0);
        }
    }

    #[test]
    fn nu_zero_gives_b_quarter_a() {
        let (a, b) = elastic_coefficients(1234.5, 0.0).unwrap();
        assert_eq!(b, a / 4.0);
    }

    #[test]
    fn incompressible_limit_rejected() {
        assert!(matches!(
            elastic_coefficients(1000.0, 0.5),
            Err(Error::IncompressibleLimit(_))
        ));
        assert!(elastic_coefficients(1000.0, -0.1).is_err());
        assert!(elastic_coefficients(0.0, 0.3).is_err());
    }

    #[test]
    fn collinear_force_reduces_to_a_over_r() {
        let params = liver();
        let a = params.coefficient_a();
        let dir = Vec3::new(1.0, 2.0, -0.5).normalize();
        let r = dir * 0.07;
        let force = dir * 3.0;
        let u = kelvinlet_displacement(&r, &force, &params).unwrap();
        let expect = dir * (a * 3.0 / 0.07);
        assert!((u - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn orthogonal_force_reduces_to_a_minus_b_over_r() {
        let params = liver();
        let a = params.coefficient_a();
        let b = params.coefficient_b();
        let r = Vec3::new(0.05, 0.0, 0.0);
        let force = Vec3::new(0.0, 2.0, 0.0);
        let u = kelvinlet_displacement(&r, &force, &params).unwrap();
        let expect = Vec3::new(0.0, (a - b) * 2.0 / 0.05, 0.0);
        assert!((u - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn singular_at_load_point() {
        let params = liver();
        assert!(matches!(
            kelvinlet_displacement(&Vec3::zeros(), &Vec3::x(), &params),
            Err(Error::SingularLoadPoint)
        ));
    }

    #[test]
    fn density_at_zero() {
        let eps: f64 = 0.01;
        let expect = 15.0 / (8.0 * std::f64::consts::PI * eps.powi(3));
        assert!((regularized_density(0.0, eps) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn regularized_zero_force_is_zero() {
        let params = liver();
        let load = KelvinletLoad::new(Vec3::zeros(), Vec3::zeros(), 0.01).unwrap();
        let u = regularized_kelvinlet(&Vec3::new(0.02, -0.01, 0.03), &load, &params);
        assert_eq!(u, Vec3::zeros());
    }

    #[test]
    fn regularized_at_origin_closed_form() {
        let params = liver();
        let a = params.coefficient_a();
        let b = params.coefficient_b();
        let eps = 0.01;
        let load = KelvinletLoad::new(Vec3::zeros(), Vec3::x(), eps).unwrap();
        let u = regularized_kelvinlet(&Vec3::zeros(), &load, &params);
        let expect = (1.5 * a - b) / eps;
        assert!((u.x - expect).abs() < 1e-15 * expect);
        assert_eq!(u.y, 0.0);
        assert_eq!(u.z, 0.0);
    }

    #[test]
    fn basis_vector_stacks_per_node_fields() {
        let mesh = TetMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(0.1, 0.0, 0.0),
                Vec3::new(0.0, 0.1, 0.0),
                Vec3::new(0.0, 0.0, 0.1),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let params = liver();
        let load =
            KelvinletLoad::new(Vec3::new(0.03, 0.02, 0.01), Vec3::new(1.0, -2.0, 0.5), 0.02)
                .unwrap();
        let d = rk_basis_vector(&mesh, &load, &params);
        assert_eq!(d.len(), 12);
        for (m, x) in mesh.nodes().iter().enumerate() {
            let u = rk_field_at(x, &load, &params);
            assert_eq!(d[3 * m], u.x);
            assert_eq!(d[3 * m + 1], u.y);
            assert_eq!(d[3 * m + 2], u.z);
        }
        let zero_load = KelvinletLoad::new(load.location, Vec3::zeros(), 0.02).unwrap();
        assert_eq!(rk_basis_vector(&mesh, &zero_load, &params), DVec::zeros(12));
    }
}

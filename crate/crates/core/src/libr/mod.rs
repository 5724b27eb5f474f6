//! Linearized iterative boundary reconstruction: fit basis weights plus a
//! rigid transform to sparse feature data.
//!
//! The code path is identical for the regularized-Kelvinlet and FEM bases;
//! the two differ only in the supplied response matrices, which is what
//! makes their head-to-head comparison meaningful.

mod lm;

pub use lm::{levenberg_marquardt, LmOptions, LmResult};

use crate::fem::ResponseMatrices;
use crate::geometry::{TetLocator, TetMesh, TriangleGrid};
use crate::{DMat, DVec, Error, Mat3, Result, Vec3};

/// Kind of sparse data feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Point pairs with known model-space counterparts (fiducials).
    CorrespondedPoints,
    /// Uncorresponded points on the (unknown) deformed surface.
    SurfaceCloud,
}

/// One weighted feature group.
#[derive(Debug, Clone)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    /// Weight w_F >= 0.
    pub weight: f64,
    /// Data-space points.
    pub points: Vec<Vec3>,
    /// Model-space counterparts, one per point (corresponded kind only).
    pub counterparts: Option<Vec<Vec3>>,
}

/// Validated collection of features.
#[derive(Debug, Clone)]
pub struct FeatureData {
    features: Vec<Feature>,
}

impl FeatureData {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidParameter("no features supplied".into()));
        }
        for f in &features {
            if f.points.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "feature '{}' has no points",
                    f.name
                )));
            }
            if !f.weight.is_finite() || f.weight < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "feature '{}' has weight {}",
                    f.name, f.weight
                )));
            }
            match f.kind {
                FeatureKind::CorrespondedPoints => match &f.counterparts {
                    Some(c) if c.len() == f.points.len() => {}
                    Some(c) => {
                        return Err(Error::DimensionMismatch(format!(
                            "feature '{}': {} counterparts for {} points",
                            f.name,
                            c.len(),
                            f.points.len()
                        )))
                    }
                    None => {
                        return Err(Error::InvalidParameter(format!(
                            "corresponded feature '{}' lacks counterparts",
                            f.name
                        )))
                    }
                },
                FeatureKind::SurfaceCloud => {}
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn total_points(&self) -> usize {
        self.features.iter().map(|f| f.points.len()).sum()
    }
}

/// Registration solve configuration.
#[derive(Debug, Clone, Copy)]
pub struct RegistrationParams {
    /// Strain-energy regularization weight w_E, Pa^-2.
    pub energy_weight: f64,
    pub max_iterations: usize,
    /// Termination threshold on the accepted-step objective change.
    pub termination_tol: f64,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            energy_weight: 1e-8,
            max_iterations: 200,
            termination_tol: 1e-12,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 0.1,
        }
    }
}

impl RegistrationParams {
    fn lm_options(&self) -> LmOptions {
        LmOptions {
            max_iterations: self.max_iterations,
            termination_tol: self.termination_tol,
            initial_damping: self.initial_damping,
            damping_increase: self.damping_increase,
            damping_decrease: self.damping_decrease,
            fd_step: 1e-6,
        }
    }
}

/// Recovered registration parameters.
#[derive(Debug, Clone)]
pub struct RegistrationState {
    /// Basis weights, length 3k.
    pub alpha: DVec,
    /// Rigid translation, meters.
    pub tau: Vec3,
    /// Rigid rotation, radians: extrinsic XYZ Euler angles about the model
    /// centroid, each wrapped into (-pi, pi].
    pub theta: Vec3,
    /// Final objective value.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rotation matrix from extrinsic XYZ Euler angles: R = Rz Ry Rx.
pub fn euler_xyz(theta: &Vec3) -> Mat3 {
    *nalgebra::Rotation3::from_euler_angles(theta.x, theta.y, theta.z).matrix()
}

/// Displaces mesh nodes by the weighted basis: x_m + (J_u alpha)_m.
pub fn apply_deformation(nodes: &[Vec3], j_u: &DMat, alpha: &DVec) -> Result<Vec<Vec3>> {
    if j_u.nrows() != 3 * nodes.len() || j_u.ncols() != alpha.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis {}x{} vs {} nodes and alpha length {}",
            j_u.nrows(),
            j_u.ncols(),
            nodes.len(),
            alpha.len()
        )));
    }
    let u = j_u * alpha;
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(m, x)| x + Vec3::new(u[3 * m], u[3 * m + 1], u[3 * m + 2]))
        .collect())
}

/// Applies the rigid part: p' = R(theta) (p - c) + c + tau.
pub fn apply_rigid(points: &[Vec3], tau: &Vec3, theta: &Vec3, centroid: &Vec3) -> Vec<Vec3> {
    let r = euler_xyz(theta);
    points
        .iter()
        .map(|p| r * (p - centroid) + centroid + tau)
        .collect()
}

/// Average strain energy f_E = (1 / 2M) alpha^T (J_strain^T J_stress) alpha.
pub fn strain_energy(alpha: &DVec, response: &ResponseMatrices) -> Result<f64> {
    if alpha.len() != response.mode_count() {
        return Err(Error::DimensionMismatch(format!(
            "alpha length {} vs {} basis modes",
            alpha.len(),
            response.mode_count()
        )));
    }
    if alpha.len() == 0 {
        return Ok(0.0);
    }
    let m = response.node_count() as f64;
    Ok((response.gram() * alpha).dot(alpha) / (2.0 * m))
}

/// Per-feature model-data residuals at a registration state.
///
/// Corresponded features measure counterpart-to-data distances; cloud
/// features measure data-to-surface distances with correspondences
/// recomputed on the deformed boundary at every evaluation.
pub struct ResidualEvaluator<'a> {
    mesh: &'a TetMesh,
    j_u: &'a DMat,
    features: &'a FeatureData,
    centroid: Vec3,
    /// Barycentric interpolation stencil of each counterpart point in the
    /// undeformed mesh (advection commutes with the affine maps applied to
    /// the nodes).
    counterpart_stencils: Vec<Option<Vec<Vec<(usize, f64)>>>>,
}

impl<'a> ResidualEvaluator<'a> {
    pub fn new(mesh: &'a TetMesh, j_u: &'a DMat, features: &'a FeatureData) -> Result<Self> {
        if mesh.boundary_tris().is_empty() {
            return Err(Error::InvalidParameter("mesh has an empty surface".into()));
        }
        let locator = TetLocator::build(mesh);
        let mut counterpart_stencils = Vec::with_capacity(features.features().len());
        for f in features.features() {
            match (&f.kind, &f.counterparts) {
                (FeatureKind::CorrespondedPoints, Some(cps)) => {
                    let stencils = cps
                        .iter()
                        .map(|p| match locator.locate(p) {
                            Some(hit) => {
                                let tet = &mesh.tets()[hit.tet];
                                hit.weights
                                    .iter()
                                    .zip(tet.iter())
                                    .map(|(w, &n)| (n, *w))
                                    .collect()
                            }
                            None => {
                                // Counterpart off the mesh: ride with the
                                // nearest node.
                                let n = nearest_node(mesh, p);
                                vec![(n, 1.0)]
                            }
                        })
                        .collect();
                    counterpart_stencils.push(Some(stencils));
                }
                _ => counterpart_stencils.push(None),
            }
        }
        Ok(Self {
            mesh,
            j_u,
            features,
            centroid: mesh.centroid(),
            counterpart_stencils,
        })
    }

    /// Deformed-and-rigidly-moved node positions for a state.
    pub fn transformed_nodes(&self, alpha: &DVec, tau: &Vec3, theta: &Vec3) -> Result<Vec<Vec3>> {
        let deformed = apply_deformation(self.mesh.nodes(), self.j_u, alpha)?;
        Ok(apply_rigid(&deformed, tau, theta, &self.centroid))
    }

    /// Residual lists, one per feature, in feature order.
    pub fn residuals(
        &self,
        alpha: &DVec,
        tau: &Vec3,
        theta: &Vec3,
    ) -> Result<Vec<Vec<f64>>> {
        let nodes = self.transformed_nodes(alpha, tau, theta)?;
        let needs_surface = self
            .features
            .features()
            .iter()
            .any(|f| f.kind == FeatureKind::SurfaceCloud);
        let grid = if needs_surface {
            Some(TriangleGrid::build(&nodes, self.mesh.boundary_tris())?)
        } else {
            None
        };

        let mut out = Vec::with_capacity(self.features.features().len());
        for (fi, f) in self.features.features().iter().enumerate() {
            let rs = match f.kind {
                FeatureKind::SurfaceCloud => {
                    let grid = grid.as_ref().expect("grid built for cloud features");
                    f.points.iter().map(|p| grid.distance(p)).collect()
                }
                FeatureKind::CorrespondedPoints => {
                    let stencils = self.counterpart_stencils[fi]
                        .as_ref()
                        .expect("stencils built for corresponded features");
                    f.points
                        .iter()
                        .zip(stencils)
                        .map(|(data, stencil)| {
                            let mut advected = Vec3::zeros();
                            for &(n, w) in stencil {
                                advected += nodes[n] * w;
                            }
                            (advected - data).norm()
                        })
                        .collect()
                }
            };
            out.push(rs);
        }
        Ok(out)
    }
}

fn nearest_node(mesh: &TetMesh, p: &Vec3) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, q) in mesh.nodes().iter().enumerate() {
        let d = (q - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// One-shot residual computation (see `ResidualEvaluator` for repeated use).
pub fn compute_residuals(
    alpha: &DVec,
    tau: &Vec3,
    theta: &Vec3,
    j_u: &DMat,
    mesh: &TetMesh,
    features: &FeatureData,
) -> Result<Vec<Vec<f64>>> {
    ResidualEvaluator::new(mesh, j_u, features)?.residuals(alpha, tau, theta)
}

/// The registration objective
/// Omega = sum_F (w_F / N_F) sum_i f_i^2 + w_E f_E^2.
pub fn objective(
    alpha: &DVec,
    tau: &Vec3,
    theta: &Vec3,
    response: &ResponseMatrices,
    mesh: &TetMesh,
    features: &FeatureData,
    params: &RegistrationParams,
) -> Result<f64> {
    let residuals = compute_residuals(alpha, tau, theta, &response.j_u, mesh, features)?;
    let f_e = strain_energy(alpha, response)?;
    let mut omega = params.energy_weight * f_e * f_e;
    for (f, rs) in features.features().iter().zip(&residuals) {
        let sum: f64 = rs.iter().map(|r| r * r).sum();
        omega += f.weight / rs.len() as f64 * sum;
    }
    Ok(omega)
}

/// Full registration output.
#[derive(Debug, Clone)]
pub struct RegistrationOutput {
    pub state: RegistrationState,
    /// Node positions after deformation and the rigid transform.
    pub deformed_nodes: Vec<Vec3>,
    /// Nonrigid nodal displacement J_u alpha, length 3M.
    pub displacement: DVec,
    /// Per-feature RMS residual in meters, in feature order.
    pub per_feature_rms: Vec<(String, f64)>,
}

/// Solves for beta = [alpha, tau, theta] minimizing the objective, starting
/// from zero (identity) unless `beta0` is given.
pub fn register(
    mesh: &TetMesh,
    response: &ResponseMatrices,
    features: &FeatureData,
    params: &RegistrationParams,
    beta0: Option<DVec>,
) -> Result<RegistrationOutput> {
    let n_modes = response.mode_count();
    if response.node_count() != mesh.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "basis for {} nodes used with a mesh of {} nodes",
            response.node_count(),
            mesh.node_count()
        )));
    }
    let evaluator = ResidualEvaluator::new(mesh, &response.j_u, features)?;
    let n_beta = n_modes + 6;
    let beta0 = match beta0 {
        Some(b) => {
            if b.len() != n_beta {
                return Err(Error::DimensionMismatch(format!(
                    "beta0 length {} vs {} parameters",
                    b.len(),
                    n_beta
                )));
            }
            b
        }
        None => DVec::zeros(n_beta),
    };

    let sqrt_we = params.energy_weight.sqrt();
    let total_points = features.total_points();
    let weights: Vec<f64> = features
        .features()
        .iter()
        .map(|f| (f.weight / f.points.len() as f64).sqrt())
        .collect();

    let residual_fn = |beta: &DVec| -> Result<DVec> {
        let (alpha, tau, theta) = split_beta(beta, n_modes);
        let per_feature = evaluator.residuals(&alpha, &tau, &theta)?;
        let mut stacked = DVec::zeros(total_points + 1);
        let mut idx = 0usize;
        for (scale, rs) in weights.iter().zip(&per_feature) {
            for r in rs {
                stacked[idx] = scale * r;
                idx += 1;
            }
        }
        stacked[idx] = sqrt_we * strain_energy(&alpha, response)?;
        Ok(stacked)
    };

    let lm = levenberg_marquardt(residual_fn, beta0, &params.lm_options())?;

    let (alpha, tau, theta) = split_beta(&lm.beta, n_modes);
    let theta = Vec3::new(
        wrap_angle(theta.x),
        wrap_angle(theta.y),
        wrap_angle(theta.z),
    );
    let per_feature = evaluator.residuals(&alpha, &tau, &theta)?;
    let per_feature_rms = features
        .features()
        .iter()
        .zip(&per_feature)
        .map(|(f, rs)| {
            let mean_sq = rs.iter().map(|r| r * r).sum::<f64>() / rs.len() as f64;
            (f.name.clone(), mean_sq.sqrt())
        })
        .collect();
    let deformed_nodes = evaluator.transformed_nodes(&alpha, &tau, &theta)?;
    let displacement = &response.j_u * &alpha;

    Ok(RegistrationOutput {
        state: RegistrationState {
            alpha,
            tau,
            theta,
            objective: lm.objective,
            iterations: lm.iterations,
            converged: lm.converged,
        },
        deformed_nodes,
        displacement,
        per_feature_rms,
    })
}

fn split_beta(beta: &DVec, n_modes: usize) -> (DVec, Vec3, Vec3) {
    let alpha = DVec::from_iterator(n_modes, beta.iter().take(n_modes).copied());
    let tau = Vec3::new(beta[n_modes], beta[n_modes + 1], beta[n_modes + 2]);
    let theta = Vec3::new(beta[n_modes + 3], beta[n_modes + 4], beta[n_modes + 5]);
    (alpha, tau, theta)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

//! Global stiffness assembly and constrained solves.
//!
//! Dirichlet constraints are eliminated symmetrically (zeroed row/column,
//! unit diagonal, right-hand-side lift) so the reduced operator stays SPD
//! for the sparse Cholesky factorization. The solver contract is the
//! relative residual bound on free dofs, not the factorization method.

use std::collections::{BTreeMap, BTreeSet};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::fem::{element_b_matrix_indexed, MaterialMatrix};
use crate::geometry::TetMesh;
use crate::{DVec, Error, Result, Vec3};

/// Relative residual bound enforced on the free dofs of every solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Sparse symmetric stiffness system K u = F with optional prescribed dofs.
pub struct StiffnessSystem {
    k: SparseColMat<usize, f64>,
    /// Prescribed displacement per dof index (3*node + component), meters.
    pub dirichlet: BTreeMap<usize, f64>,
    /// Applied nodal loads, newtons, length 3M.
    pub loads: DVec,
}

impl StiffnessSystem {
    pub fn stiffness(&self) -> &SparseColMat<usize, f64> {
        &self.k
    }

    pub fn dof_count(&self) -> usize {
        self.k.ncols()
    }

    /// K x for a dense vector.
    pub fn apply(&self, x: &DVec) -> DVec {
        spmv(&self.k, x)
    }

    /// Prescribes all three components of a node.
    pub fn fix_node(&mut self, node: usize, value: Vec3) {
        for c in 0..3 {
            self.dirichlet.insert(3 * node + c, value[c]);
        }
    }

    /// Adds a nodal force.
    pub fn add_load(&mut self, node: usize, force: Vec3) {
        for c in 0..3 {
            self.loads[3 * node + c] += force[c];
        }
    }
}

fn spmv(k: &SparseColMat<usize, f64>, x: &DVec) -> DVec {
    let kr = k.as_ref();
    let col_ptr = kr.col_ptr();
    let row_idx = kr.row_idx();
    let val = kr.val();
    let mut y = DVec::zeros(k.nrows());
    for j in 0..k.ncols() {
        let xj = x[j];
        if xj != 0.0 {
            for idx in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[idx]] += val[idx] * xj;
            }
        }
    }
    y
}

/// |K| |x|, the component-wise absolute product used for backward-error
/// scaling.
fn spmv_abs(k: &SparseColMat<usize, f64>, x: &DVec) -> DVec {
    let kr = k.as_ref();
    let col_ptr = kr.col_ptr();
    let row_idx = kr.row_idx();
    let val = kr.val();
    let mut y = DVec::zeros(k.nrows());
    for j in 0..k.ncols() {
        let xj = x[j].abs();
        if xj != 0.0 {
            for idx in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[idx]] += val[idx].abs() * xj;
            }
        }
    }
    y
}

/// Assembles K = sum over tets of scatter(B^T D B * volume).
///
/// Triplets are accumulated in a fixed element order, so the assembled
/// matrix is identical regardless of any caller-side parallelism.
pub fn assemble_stiffness(mesh: &TetMesh, material: &MaterialMatrix) -> Result<StiffnessSystem> {
    let n_dof = 3 * mesh.node_count();
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(144 * mesh.tet_count());
    for (ti, tet) in mesh.tets().iter().enumerate() {
        let verts = [
            mesh.nodes()[tet[0]],
            mesh.nodes()[tet[1]],
            mesh.nodes()[tet[2]],
            mesh.nodes()[tet[3]],
        ];
        let op = element_b_matrix_indexed(&verts, ti)?;
        let ke = op.b.transpose() * material.matrix() * op.b * op.volume;
        for a in 0..4 {
            for ca in 0..3 {
                let gi = 3 * tet[a] + ca;
                for b in 0..4 {
                    for cb in 0..3 {
                        let gj = 3 * tet[b] + cb;
                        trips.push(Triplet::new(gi, gj, ke[(3 * a + ca, 3 * b + cb)]));
                    }
                }
            }
        }
    }
    let k = SparseColMat::try_new_from_triplets(n_dof, n_dof, &trips)
        .map_err(|e| Error::Numerical(format!("stiffness assembly failed: {e:?}")))?;
    Ok(StiffnessSystem {
        k,
        dirichlet: BTreeMap::new(),
        loads: DVec::zeros(n_dof),
    })
}

/// Result of a constrained solve.
pub struct Solution {
    /// Full displacement vector, length 3M (prescribed dofs included).
    pub u: DVec,
    /// Reaction force at each constrained dof: (K u - F_applied).
    pub reactions: BTreeMap<usize, f64>,
}

/// Factorization of a stiffness matrix under a fixed constrained-dof set.
///
/// Building one factorization and solving against many prescribed-value /
/// load combinations is what makes the basis construction affordable.
pub struct DirichletSolver<'k> {
    k: &'k SparseColMat<usize, f64>,
    constrained: BTreeSet<usize>,
    is_constrained: Vec<bool>,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl<'k> DirichletSolver<'k> {
    pub fn new(k: &'k SparseColMat<usize, f64>, constrained: &BTreeSet<usize>) -> Result<Self> {
        let n = k.ncols();
        if constrained.is_empty() {
            return Err(Error::UnderConstrained);
        }
        let mut is_constrained = vec![false; n];
        for &d in constrained {
            if d >= n {
                return Err(Error::InvalidParameter(format!(
                    "constrained dof {d} out of range ({n} dofs)"
                )));
            }
            is_constrained[d] = true;
        }
        let kr = k.as_ref();
        let col_ptr = kr.col_ptr();
        let row_idx = kr.row_idx();
        let val = kr.val();
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(val.len());
        for j in 0..n {
            if is_constrained[j] {
                trips.push(Triplet::new(j, j, 1.0));
                continue;
            }
            for idx in col_ptr[j]..col_ptr[j + 1] {
                let i = row_idx[idx];
                if !is_constrained[i] {
                    trips.push(Triplet::new(i, j, val[idx]));
                }
            }
        }
        let reduced = SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Numerical(format!("constraint elimination failed: {e:?}")))?;
        let llt = reduced
            .sp_cholesky(Side::Lower)
            .map_err(|_| Error::UnderConstrained)?;
        Ok(Self {
            k,
            constrained: constrained.clone(),
            is_constrained,
            llt,
        })
    }

    /// Solves with the given applied loads and prescribed values (defaulting
    /// to zero for constrained dofs absent from `values`).
    pub fn solve(&self, loads: &DVec, values: &BTreeMap<usize, f64>) -> Result<Solution> {
        let n = self.k.ncols();
        if loads.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "load vector length {} vs {n} dofs",
                loads.len()
            )));
        }
        let kr = self.k.as_ref();
        let col_ptr = kr.col_ptr();
        let row_idx = kr.row_idx();
        let val = kr.val();

        // Right-hand side with symmetric lift of prescribed values.
        let mut rhs = loads.clone();
        for (&dof, &g) in values {
            if !self.is_constrained[dof] {
                return Err(Error::InvalidParameter(format!(
                    "value prescribed at dof {dof} which is not constrained"
                )));
            }
            if g != 0.0 {
                for idx in col_ptr[dof]..col_ptr[dof + 1] {
                    let i = row_idx[idx];
                    if !self.is_constrained[i] {
                        rhs[i] -= val[idx] * g;
                    }
                }
            }
        }
        for &dof in &self.constrained {
            rhs[dof] = values.get(&dof).copied().unwrap_or(0.0);
        }

        let rhs_mat = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&rhs_mat);
        let mut u = DVec::zeros(n);
        for i in 0..n {
            u[i] = x[(i, 0)];
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite solution".into()));
        }

        // Enforce the residual contract on free dofs, measured against the
        // backward-error scale |K||u| + |F| (plain ||Ku|| vanishes at
        // equilibrium and would make the ratio meaningless).
        let ku = spmv(self.k, &u);
        let ku_abs = spmv_abs(self.k, &u);
        let mut res2 = 0.0;
        let mut scale2 = 0.0;
        for i in 0..n {
            if !self.is_constrained[i] {
                let r = ku[i] - loads[i];
                res2 += r * r;
                let s = ku_abs[i] + loads[i].abs();
                scale2 += s * s;
            }
        }
        let scale = scale2.sqrt();
        if res2.sqrt() > SOLVE_RESIDUAL_TOL * scale.max(1e-30) {
            return Err(Error::Numerical(format!(
                "solve residual {:.3e} exceeds {:.1e} of load scale {:.3e}",
                res2.sqrt(),
                SOLVE_RESIDUAL_TOL,
                scale
            )));
        }

        let mut reactions = BTreeMap::new();
        for &dof in &self.constrained {
            reactions.insert(dof, ku[dof] - loads[dof]);
        }
        Ok(Solution { u, reactions })
    }
}

/// Solves the system with its stored Dirichlet data and loads.
pub fn solve_displacement(system: &StiffnessSystem) -> Result<Solution> {
    let constrained: BTreeSet<usize> = system.dirichlet.keys().copied().collect();
    let solver = DirichletSolver::new(&system.k, &constrained)?;
    solver.solve(&system.loads, &system.dirichlet)
}

/// Solves an unconstrained system with self-equilibrated loads by conjugate
/// gradients, explicitly projecting out the six rigid modes.
///
/// Returns the displacement with no rigid-body component.
pub fn solve_self_equilibrated(system: &StiffnessSystem, nodes: &[Vec3]) -> Result<DVec> {
    let n = system.dof_count();
    if 3 * nodes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} nodes vs {n} dofs",
            nodes.len()
        )));
    }
    let modes = rigid_modes(nodes);
    let loads = &system.loads;
    let load_norm = loads.norm();
    if load_norm == 0.0 {
        return Ok(DVec::zeros(n));
    }
    // Loads must already be orthogonal to the rigid modes.
    for m in &modes {
        if m.dot(loads).abs() > 1e-6 * load_norm {
            return Err(Error::InvalidParameter(
                "loads are not self-equilibrated".into(),
            ));
        }
    }
    let project = |v: &mut DVec| {
        for m in &modes {
            let c = m.dot(v);
            *v -= m * c;
        }
    };
    let mut b = loads.clone();
    project(&mut b);

    let mut x = DVec::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let b_norm = b.norm();
    let max_iters = 20 * n;
    for _ in 0..max_iters {
        if rs.sqrt() <= 1e-10 * b_norm {
            break;
        }
        let mut ap = spmv(&system.k, &p);
        project(&mut ap);
        let alpha = rs / p.dot(&ap);
        if !alpha.is_finite() {
            return Err(Error::Numerical("conjugate gradient breakdown".into()));
        }
        x += &p * alpha;
        r -= &ap * alpha;
        project(&mut r);
        let rs_new = r.norm_squared();
        let beta = rs_new / rs;
        p = &r + &p * beta;
        rs = rs_new;
    }
    if rs.sqrt() > 1e-8 * b_norm {
        return Err(Error::Numerical(format!(
            "conjugate gradient stalled at relative residual {:.3e}",
            rs.sqrt() / b_norm
        )));
    }
    project(&mut x);
    Ok(x)
}

/// Orthonormal basis of the six rigid-body modes (translations and
/// infinitesimal rotations about the centroid).
fn rigid_modes(nodes: &[Vec3]) -> Vec<DVec> {
    let n = nodes.len();
    let centroid = nodes.iter().sum::<Vec3>() / n as f64;
    let mut modes: Vec<DVec> = Vec::with_capacity(6);
    for c in 0..3 {
        let mut m = DVec::zeros(3 * n);
        for i in 0..n {
            m[3 * i + c] = 1.0;
        }
        modes.push(m);
    }
    for axis in 0..3 {
        let mut w = Vec3::zeros();
        w[axis] = 1.0;
        let mut m = DVec::zeros(3 * n);
        for (i, p) in nodes.iter().enumerate() {
            let v = w.cross(&(p - centroid));
            m[3 * i] = v.x;
            m[3 * i + 1] = v.y;
            m[3 * i + 2] = v.z;
        }
        modes.push(m);
    }
    // Gram-Schmidt.
    let mut ortho: Vec<DVec> = Vec::with_capacity(6);
    for mut m in modes {
        for q in &ortho {
            let c = q.dot(&m);
            m -= q * c;
        }
        let norm = m.norm();
        if norm > 1e-12 {
            ortho.push(m / norm);
        }
    }
    ortho
}


#[cfg(test)]
impl StiffnessSystem {
    /// Max |K| entry, for test-side tolerance scaling.
    fn as_dense_scale(&self) -> f64 {
        self.k
            .as_ref()
            .val()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

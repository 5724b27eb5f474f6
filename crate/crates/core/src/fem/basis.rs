//! FEM displacement basis via perturb-and-relax control-point responses.
//!
//! Stage 1 prescribes a small displacement at one control-point node (all
//! other control points held at zero) and records the reaction force there.
//! Stage 2 releases that constraint and reapplies the reaction as a load
//! distributed over the control point's Voronoi tile, weighted by lumped
//! boundary area. Far from the tile the two solutions agree (Saint-Venant),
//! but the relaxed field is free of the singular point constraint.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::fem::{assemble_stiffness, DirichletSolver, MaterialMatrix, StiffnessSystem};
use crate::geometry::{lumped_boundary_areas, voronoi_tile, ControlPointSet, TetMesh};
use crate::{DMat, DVec, Error, Result, Vec3};

/// Knobs for the perturb-and-relax construction.
#[derive(Debug, Clone, Copy)]
pub struct PerturbOptions {
    /// Prescribed displacement magnitude in meters (default 1 mm; the model
    /// is linear, so basis columns are normalized away from this choice).
    pub magnitude: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self { magnitude: 1e-3 }
    }
}

/// One relaxed response: control point `index` perturbed along `axis`.
///
/// Returns the stage-2 displacement vector of length 3M (not normalized).
pub fn perturb_and_relax(
    mesh: &TetMesh,
    cps: &ControlPointSet,
    index: usize,
    axis: usize,
    material: &MaterialMatrix,
    magnitude: f64,
) -> Result<DVec> {
    let system = assemble_stiffness(mesh, material)?;
    let ctx = BasisContext::new(mesh, cps, &system)?;
    let stage1 = ctx.stage1_solver()?;
    let columns = ctx.relaxed_columns(&stage1, index, magnitude, Some(axis))?;
    Ok(columns.into_iter().next().expect("one requested axis"))
}

struct BasisContext<'a> {
    mesh: &'a TetMesh,
    cps: &'a ControlPointSet,
    system: &'a StiffnessSystem,
    candidates: Vec<usize>,
    areas: HashMap<usize, f64>,
}

impl<'a> BasisContext<'a> {
    fn new(
        mesh: &'a TetMesh,
        cps: &'a ControlPointSet,
        system: &'a StiffnessSystem,
    ) -> Result<Self> {
        if cps.len() < 2 {
            // A single control point leaves stage 2 with no constraints at
            // all once it is released.
            return Err(Error::UnderConstrained);
        }
        Ok(Self {
            mesh,
            cps,
            system,
            candidates: cps.source_region().candidate_nodes(mesh)?,
            areas: lumped_boundary_areas(mesh),
        })
    }

    fn stage1_solver(&self) -> Result<DirichletSolver<'a>> {
        let mut constrained = BTreeSet::new();
        for &node in self.cps.nearest_node() {
            for c in 0..3 {
                constrained.insert(3 * node + c);
            }
        }
        DirichletSolver::new(self.system.stiffness(), &constrained)
    }

    /// Relaxed responses for one control point. With `only_axis` set, solves
    /// just that axis; otherwise all three, sharing the stage-2
    /// factorization.
    fn relaxed_columns(
        &self,
        stage1: &DirichletSolver,
        index: usize,
        magnitude: f64,
        only_axis: Option<usize>,
    ) -> Result<Vec<DVec>> {
        if index >= self.cps.len() {
            return Err(Error::InvalidParameter(format!(
                "control point index {index} out of range (k = {})",
                self.cps.len()
            )));
        }
        let node = self.cps.nearest_node()[index];
        let zero_loads = DVec::zeros(self.system.dof_count());

        let tile = voronoi_tile(self.mesh, self.cps, index, &self.candidates)?;
        if tile.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "empty Voronoi tile for control point {index}"
            )));
        }
        let total_area: f64 = tile
            .iter()
            .map(|n| self.areas.get(n).copied().unwrap_or(0.0))
            .sum();
        if total_area <= 0.0 {
            return Err(Error::Numerical(format!(
                "Voronoi tile of control point {index} has zero boundary area"
            )));
        }

        let mut constrained = BTreeSet::new();
        for (i, &other) in self.cps.nearest_node().iter().enumerate() {
            if i != index {
                for c in 0..3 {
                    constrained.insert(3 * other + c);
                }
            }
        }
        let stage2 = DirichletSolver::new(self.system.stiffness(), &constrained)?;

        let axes: Vec<usize> = match only_axis {
            Some(a) if a < 3 => vec![a],
            Some(a) => {
                return Err(Error::InvalidParameter(format!("axis {a} out of range")));
            }
            None => vec![0, 1, 2],
        };
        let mut out = Vec::with_capacity(axes.len());
        for axis in axes {
            // Stage 1: prescribed perturbation at the control point, every
            // other control point pinned at zero.
            let mut values = BTreeMap::new();
            values.insert(3 * node + axis, magnitude);
            let sol1 = stage1.solve(&zero_loads, &values)?;
            let reaction = Vec3::new(
                sol1.reactions[&(3 * node)],
                sol1.reactions[&(3 * node + 1)],
                sol1.reactions[&(3 * node + 2)],
            );

            // Stage 2: reapply the reaction as area-weighted tile loads.
            let mut loads = DVec::zeros(self.system.dof_count());
            for &n in &tile {
                let w = self.areas.get(&n).copied().unwrap_or(0.0) / total_area;
                for c in 0..3 {
                    loads[3 * n + c] += reaction[c] * w;
                }
            }
            let sol2 = stage2.solve(&loads, &BTreeMap::new())?;
            out.push(sol2.u);
        }
        Ok(out)
    }
}

/// Builds the 3M x 3k FEM displacement response matrix.
///
/// Column ordering matches the regularized-Kelvinlet basis: (cp 0, x),
/// (cp 0, y), (cp 0, z), (cp 1, x), ... Each column is the relaxed response
/// divided by the perturbation magnitude, i.e. response per meter of control
/// perturbation.
///
/// One stage-1 factorization covers all columns; each control point then
/// needs its own stage-2 factorization (its constraint set omits that
/// point), which is what makes this precompute phase expensive compared to
/// the analytic basis.
pub fn build_fem_basis(
    mesh: &TetMesh,
    cps: &ControlPointSet,
    material: &MaterialMatrix,
    options: PerturbOptions,
) -> Result<DMat> {
    if !(options.magnitude > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation magnitude {} must be positive",
            options.magnitude
        )));
    }
    let system = assemble_stiffness(mesh, material)?;
    let ctx = BasisContext::new(mesh, cps, &system)?;
    let stage1 = ctx.stage1_solver()?;

    let rows = 3 * mesh.node_count();
    let cols = 3 * cps.len();
    let mut basis = DMat::zeros(rows, cols);
    for index in 0..cps.len() {
        let columns = ctx.relaxed_columns(&stage1, index, options.magnitude, None)?;
        for (axis, column) in columns.into_iter().enumerate() {
            basis
                .column_mut(3 * index + axis)
                .copy_from(&(column / options.magnitude));
        }
    }
    Ok(basis)
}

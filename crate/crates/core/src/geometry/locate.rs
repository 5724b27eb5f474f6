//! Point location in tetrahedral meshes with barycentric weights.

use crate::geometry::TetMesh;
use crate::{Mat3, Vec3};

/// Weights below this (slightly negative) threshold mean "outside".
pub const INSIDE_TOL: f64 = -1e-9;

/// A located point: owning tet and its four barycentric weights.
#[derive(Debug, Clone, Copy)]
pub struct BarycentricHit {
    pub tet: usize,
    pub weights: [f64; 4],
}

/// Barycentric weights of `p` in a single tet (may be negative outside).
pub fn tet_barycentric(nodes: &[Vec3], tet: &[usize; 4], p: &Vec3) -> Option<[f64; 4]> {
    let a = nodes[tet[0]];
    let m = Mat3::from_columns(&[
        nodes[tet[1]] - a,
        nodes[tet[2]] - a,
        nodes[tet[3]] - a,
    ]);
    let w = m.lu().solve(&(p - a))?;
    Some([1.0 - w.x - w.y - w.z, w.x, w.y, w.z])
}

/// Brute-force point location over all tets. Returns the containing tet and
/// weights (partition of unity), or `None` when `p` is outside the mesh.
pub fn barycentric_locate(mesh: &TetMesh, p: &Vec3) -> Option<BarycentricHit> {
    best_hit(mesh, p, 0..mesh.tet_count())
}

fn best_hit<I: Iterator<Item = usize>>(mesh: &TetMesh, p: &Vec3, tets: I) -> Option<BarycentricHit> {
    let mut best: Option<(f64, BarycentricHit)> = None;
    for ti in tets {
        if let Some(w) = tet_barycentric(mesh.nodes(), &mesh.tets()[ti], p) {
            let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(b, _)| min_w > b) {
                best = Some((min_w, BarycentricHit { tet: ti, weights: w }));
            }
        }
    }
    match best {
        Some((min_w, hit)) if min_w >= INSIDE_TOL => Some(hit),
        _ => None,
    }
}

/// Uniform-grid accelerator for `barycentric_locate`.
pub struct TetLocator<'a> {
    mesh: &'a TetMesh,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> TetLocator<'a> {
    pub fn build(mesh: &'a TetMesh) -> Self {
        let nodes = mesh.nodes();
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for n in nodes {
            lo = lo.inf(n);
            hi = hi.sup(n);
        }
        // Cell size from the average tet bounding box edge.
        let mut edge = 0.0;
        for tet in mesh.tets() {
            let mut tlo = Vec3::repeat(f64::INFINITY);
            let mut thi = Vec3::repeat(f64::NEG_INFINITY);
            for &v in tet {
                tlo = tlo.inf(&nodes[v]);
                thi = thi.sup(&nodes[v]);
            }
            edge += (thi - tlo).max();
        }
        let cell = (edge / mesh.tet_count() as f64).max(1e-12);
        let extent = hi - lo;
        let dims = [
            (extent.x / cell).ceil() as usize + 1,
            (extent.y / cell).ceil() as usize + 1,
            (extent.z / cell).ceil() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let clamp_cell = |v: f64, d: usize| -> usize { (v.max(0.0) as usize).min(d - 1) };
        for (ti, tet) in mesh.tets().iter().enumerate() {
            let mut tlo = Vec3::repeat(f64::INFINITY);
            let mut thi = Vec3::repeat(f64::NEG_INFINITY);
            for &v in tet {
                tlo = tlo.inf(&nodes[v]);
                thi = thi.sup(&nodes[v]);
            }
            let i0 = clamp_cell(((tlo.x - lo.x) / cell).floor(), dims[0]);
            let i1 = clamp_cell(((thi.x - lo.x) / cell).floor(), dims[0]);
            let j0 = clamp_cell(((tlo.y - lo.y) / cell).floor(), dims[1]);
            let j1 = clamp_cell(((thi.y - lo.y) / cell).floor(), dims[1]);
            let k0 = clamp_cell(((tlo.z - lo.z) / cell).floor(), dims[2]);
            let k1 = clamp_cell(((thi.z - lo.z) / cell).floor(), dims[2]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    for k in k0..=k1 {
                        buckets[(i * dims[1] + j) * dims[2] + k].push(ti as u32);
                    }
                }
            }
        }
        Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    /// Same contract as `barycentric_locate`.
    pub fn locate(&self, p: &Vec3) -> Option<BarycentricHit> {
        let rel = p - self.origin;
        let i = (rel.x / self.cell).floor();
        let j = (rel.y / self.cell).floor();
        let k = (rel.z / self.cell).floor();
        if i < 0.0 || j < 0.0 || k < 0.0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return None;
        }
        let bucket = &self.buckets[(i * self.dims[1] + j) * self.dims[2] + k];
        best_hit(self.mesh, p, bucket.iter().map(|&t| t as usize))
    }

    /// Interpolates a per-node vector field at `p`; `None` outside the mesh.
    pub fn interpolate(&self, p: &Vec3, nodal: &[Vec3]) -> Option<Vec3> {
        let hit = self.locate(p)?;
        let tet = &self.mesh.tets()[hit.tet];
        let mut out = Vec3::zeros();
        for (w, &v) in hit.weights.iter().zip(tet.iter()) {
            out += nodal[v] * *w;
        }
        Some(out)
    }
}

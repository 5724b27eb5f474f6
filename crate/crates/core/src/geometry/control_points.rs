//! Control-point placement on mesh surfaces and Voronoi partitioning.

use std::collections::HashMap;

use crate::geometry::{SurfaceRegion, TetMesh};
use crate::{Error, Result, Vec3};

const KMEANS_MOTION_TOL: f64 = 1e-9;
const KMEANS_MAX_ITERS: usize = 500;

/// Control points snapped to boundary nodes.
///
/// Snapping to nodes is what lets the FEM basis prescribe a Dirichlet
/// constraint exactly at each control point.
#[derive(Debug, Clone)]
pub struct ControlPointSet {
    positions: Vec<Vec3>,
    nearest_node: Vec<usize>,
    source_region: SurfaceRegion,
}

impl ControlPointSet {
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn nearest_node(&self) -> &[usize] {
        &self.nearest_node
    }

    pub fn source_region(&self) -> &SurfaceRegion {
        &self.source_region
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Distributes `k` control points evenly over the candidate nodes of a
/// surface region via Lloyd's k-means, snapping each converged centroid to
/// its nearest candidate node.
///
/// Seeding is farthest-point from a seed-selected start node, so the result
/// is bitwise deterministic for a fixed (mesh, region, k, seed).
pub fn kmeans_control_points(
    mesh: &TetMesh,
    region: &SurfaceRegion,
    k: usize,
    seed: u64,
) -> Result<ControlPointSet> {
    let candidates = region.candidate_nodes(mesh)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > candidates.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {} candidate nodes of region '{region}'",
            candidates.len()
        )));
    }
    let coords: Vec<Vec3> = candidates.iter().map(|&n| mesh.nodes()[n]).collect();

    if k == candidates.len() {
        return Ok(ControlPointSet {
            positions: coords,
            nearest_node: candidates,
            source_region: region.clone(),
        });
    }

    let mut centroids = farthest_point_seeds(&coords, k, seed);
    lloyd(&coords, &mut centroids);
    let chosen = snap_to_candidates(&coords, &centroids);

    Ok(ControlPointSet {
        positions: chosen.iter().map(|&i| coords[i]).collect(),
        nearest_node: chosen.iter().map(|&i| candidates[i]).collect(),
        source_region: region.clone(),
    })
}

/// Lloyd's iteration to convergence (centroid motion below tolerance).
fn lloyd(coords: &[Vec3], centroids: &mut Vec<Vec3>) {
    let k = centroids.len();
    let mut assignment = vec![0usize; coords.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        for (i, p) in coords.iter().enumerate() {
            assignment[i] = nearest_index(centroids, p);
        }
        let mut sums = vec![Vec3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums[c] += coords[i];
            counts[c] += 1;
        }
        let mut max_motion: f64 = 0.0;
        for c in 0..k {
            if counts[c] > 0 {
                let next = sums[c] / counts[c] as f64;
                max_motion = max_motion.max((next - centroids[c]).norm());
                centroids[c] = next;
            }
        }
        if max_motion < KMEANS_MOTION_TOL {
            break;
        }
    }
}

/// Snaps each centroid to its nearest candidate; if two centroids would
/// collapse onto one node, the later one takes its nearest unused candidate
/// so control points stay distinct.
fn snap_to_candidates(coords: &[Vec3], centroids: &[Vec3]) -> Vec<usize> {
    let mut taken = vec![false; coords.len()];
    let mut chosen = Vec::with_capacity(centroids.len());
    for centroid in centroids {
        let first = nearest_index(coords, centroid);
        let pick = if !taken[first] {
            first
        } else {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (i, p) in coords.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                let d = (p - centroid).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        };
        taken[pick] = true;
        chosen.push(pick);
    }
    chosen
}

/// Greedy farthest-point seeding; ties break toward the lower index.
fn farthest_point_seeds(coords: &[Vec3], k: usize, seed: u64) -> Vec<Vec3> {
    let start = (seed % coords.len() as u64) as usize;
    let mut seeds = vec![coords[start]];
    let mut min_d: Vec<f64> = coords
        .iter()
        .map(|p| (p - coords[start]).norm_squared())
        .collect();
    while seeds.len() < k {
        let mut best = 0usize;
        let mut best_d = -1.0;
        for (i, &d) in min_d.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        seeds.push(coords[best]);
        for (i, p) in coords.iter().enumerate() {
            let d = (p - coords[best]).norm_squared();
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    seeds
}

fn nearest_index(points: &[Vec3], p: &Vec3) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, q) in points.iter().enumerate() {
        let d = (q - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Candidate nodes whose nearest control point is `cps[index]`.
///
/// Ties break toward the lower control-point index, so the tiles over all
/// indices partition the candidate set.
pub fn voronoi_tile(
    mesh: &TetMesh,
    cps: &ControlPointSet,
    index: usize,
    candidates: &[usize],
) -> Result<Vec<usize>> {
    if index >= cps.len() {
        return Err(Error::InvalidParameter(format!(
            "control point index {index} out of range (k = {})",
            cps.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty candidate node set".into()));
    }
    let mut tile: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&n| nearest_index(cps.positions(), &mesh.nodes()[n]) == index)
        .collect();
    tile.sort_unstable();
    Ok(tile)
}

/// Lumped boundary area per node: one third of each adjacent boundary
/// triangle's area, keyed by node index.
pub fn lumped_boundary_areas(mesh: &TetMesh) -> HashMap<usize, f64> {
    let mut areas: HashMap<usize, f64> = HashMap::new();
    for tri in mesh.boundary_tris() {
        let (a, b, c) = (
            mesh.nodes()[tri[0]],
            mesh.nodes()[tri[1]],
            mesh.nodes()[tri[2]],
        );
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        for &v in tri {
            *areas.entry(v).or_insert(0.0) += area / 3.0;
        }
    }
    areas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TetMesh;

    fn two_tet_mesh() -> TetMesh {
        let nodes = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        TetMesh::new(nodes, vec![[0, 1, 2, 3], [1, 2, 3, 4]]).unwrap()
    }

    #[test]
    fn k_equals_one_picks_node_nearest_surface_centroid() {
        let mesh = two_tet_mesh();
        let cps =
            kmeans_control_points(&mesh, &SurfaceRegion::Entire, 1, 7).unwrap();
        assert_eq!(cps.len(), 1);
        // Lloyd converges to the candidate centroid; the pick is the node
        // nearest it.
        let candidates = mesh.boundary_nodes();
        let centroid = candidates
            .iter()
            .map(|&n| mesh.nodes()[n])
            .sum::<Vec3>()
            / candidates.len() as f64;
        let expect = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = (mesh.nodes()[a] - centroid).norm_squared();
                let db = (mesh.nodes()[b] - centroid).norm_squared();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(cps.nearest_node()[0], expect);
    }

    #[test]
    fn k_saturation_selects_every_candidate_once() {
        let mesh = two_tet_mesh();
        let candidates = mesh.boundary_nodes();
        let cps =
            kmeans_control_points(&mesh, &SurfaceRegion::Entire, candidates.len(), 3)
                .unwrap();
        let mut selected = cps.nearest_node().to_vec();
        selected.sort_unstable();
        assert_eq!(selected, candidates);
    }

    #[test]
    fn k_larger_than_candidates_errors() {
        let mesh = two_tet_mesh();
        assert!(kmeans_control_points(&mesh, &SurfaceRegion::Entire, 99, 0).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mesh = two_tet_mesh();
        let a = kmeans_control_points(&mesh, &SurfaceRegion::Entire, 3, 42).unwrap();
        let b = kmeans_control_points(&mesh, &SurfaceRegion::Entire, 3, 42).unwrap();
        assert_eq!(a.nearest_node(), b.nearest_node());
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn single_control_point_tile_is_whole_candidate_set() {
        let mesh = two_tet_mesh();
        let cps = kmeans_control_points(&mesh, &SurfaceRegion::Entire, 1, 0).unwrap();
        let candidates = mesh.boundary_nodes();
        let tile = voronoi_tile(&mesh, &cps, 0, &candidates).unwrap();
        assert_eq!(tile, candidates);
    }

    #[test]
    fn own_nearest_node_is_in_tile() {
        let mesh = two_tet_mesh();
        let candidates = mesh.boundary_nodes();
        let cps = kmeans_control_points(&mesh, &SurfaceRegion::Entire, 3, 1).unwrap();
        for i in 0..cps.len() {
            let tile = voronoi_tile(&mesh, &cps, i, &candidates).unwrap();
            assert!(tile.contains(&cps.nearest_node()[i]));
        }
    }
}

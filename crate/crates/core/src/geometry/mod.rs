//! Tetrahedral mesh representation, surface extraction, and spatial queries.
//!
//! All structures are immutable after construction; queries are safe under
//! concurrent reads.

mod closest;
mod control_points;
mod locate;

pub use closest::{closest_point_on_surface, closest_point_on_triangle, TriangleGrid};
pub use control_points::{
    kmeans_control_points, lumped_boundary_areas, voronoi_tile, ControlPointSet,
};
pub use locate::{barycentric_locate, BarycentricHit, TetLocator};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::{Error, Result, Vec3};

/// Volume below which a tet is treated as degenerate, in m^3.
pub const DEGENERATE_VOLUME: f64 = 1e-15;

/// Tetrahedral mesh of the organ domain with named boundary patches.
///
/// Nodes are in meters. Tets follow a positive-signed-volume ordering
/// convention; boundary triangles are oriented outward.
#[derive(Debug, Clone)]
pub struct TetMesh {
    nodes: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    boundary_tris: Vec<[usize; 3]>,
    patch_labels: BTreeMap<String, BTreeSet<usize>>,
}

impl TetMesh {
    /// Builds a mesh from nodes and tets, validating indices and orientation
    /// and extracting the outward-oriented boundary.
    pub fn new(nodes: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        if nodes.is_empty() || tets.is_empty() {
            return Err(Error::InvalidMesh("empty node or tet list".into()));
        }
        for (i, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= nodes.len() {
                    return Err(Error::InvalidMesh(format!(
                        "tet {i} references node {v} but mesh has {} nodes",
                        nodes.len()
                    )));
                }
            }
        }
        let boundary_tris = extract_boundary(&nodes, &tets)?;
        Ok(Self {
            nodes,
            tets,
            boundary_tris,
            patch_labels: BTreeMap::new(),
        })
    }

    /// Attaches named patches. Each label set must be a subset of the
    /// boundary node set.
    pub fn with_patches(mut self, patches: BTreeMap<String, BTreeSet<usize>>) -> Result<Self> {
        let boundary: BTreeSet<usize> = self.boundary_nodes().into_iter().collect();
        for (name, set) in &patches {
            if let Some(&bad) = set.iter().find(|n| !boundary.contains(n)) {
                return Err(Error::InvalidMesh(format!(
                    "patch '{name}' contains node {bad} which is not on the boundary"
                )));
            }
        }
        self.patch_labels = patches;
        Ok(self)
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_tris(&self) -> &[[usize; 3]] {
        &self.boundary_tris
    }

    pub fn patch_labels(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.patch_labels
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    /// Sorted indices of all nodes referenced by boundary triangles.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary_tris
            .iter()
            .flat_map(|t| t.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Sorted node indices of a named patch.
    pub fn patch_nodes(&self, name: &str) -> Result<Vec<usize>> {
        let set = self
            .patch_labels
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown patch '{name}'")))?;
        if set.is_empty() {
            return Err(Error::InvalidParameter(format!("patch '{name}' is empty")));
        }
        Ok(set.iter().copied().collect())
    }

    /// Centroid of all mesh nodes.
    pub fn centroid(&self) -> Vec3 {
        self.nodes.iter().sum::<Vec3>() / self.nodes.len() as f64
    }

    /// Total mesh volume in m^3.
    pub fn volume(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| tet_signed_volume(&self.nodes, t))
            .sum()
    }

    /// Mean boundary edge length in meters.
    pub fn mean_surface_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for tri in &self.boundary_tris {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                total += (self.nodes[tri[a]] - self.nodes[tri[b]]).norm();
                count += 1;
            }
        }
        total / count as f64
    }
}

/// Signed volume of a tet under the fixed vertex-ordering convention.
pub fn tet_signed_volume(nodes: &[Vec3], tet: &[usize; 4]) -> f64 {
    let e1 = nodes[tet[1]] - nodes[tet[0]];
    let e2 = nodes[tet[2]] - nodes[tet[0]];
    let e3 = nodes[tet[3]] - nodes[tet[0]];
    e1.dot(&e2.cross(&e3)) / 6.0
}

/// Extracts the boundary of a tet soup: exactly the faces owned by a single
/// tet, each oriented outward (face normal points away from the owning tet's
/// centroid). Rejects inverted tets.
pub fn extract_boundary(nodes: &[Vec3], tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    for (i, tet) in tets.iter().enumerate() {
        let v = tet_signed_volume(nodes, tet);
        if v <= 0.0 {
            return Err(Error::InvertedTet { index: i, volume: v });
        }
    }

    // Count faces by sorted key; remember one owning (tet, face) per key.
    let mut face_count: HashMap<[usize; 3], (u32, usize, [usize; 3])> = HashMap::new();
    for (ti, tet) in tets.iter().enumerate() {
        for face in tet_faces(tet) {
            let mut key = face;
            key.sort_unstable();
            let entry = face_count.entry(key).or_insert((0, ti, face));
            entry.0 += 1;
            if entry.0 == 1 {
                entry.1 = ti;
                entry.2 = face;
            }
        }
    }

    let mut boundary: Vec<(usize, [usize; 3])> = Vec::new();
    for (_, (count, ti, face)) in face_count {
        if count == 1 {
            boundary.push((ti, face));
        }
    }
    // Deterministic output order regardless of hash iteration.
    boundary.sort_unstable();

    let mut tris = Vec::with_capacity(boundary.len());
    for (ti, face) in boundary {
        tris.push(orient_outward(nodes, &tets[ti], face));
    }
    Ok(tris)
}

/// The four faces of a tet as vertex triples.
fn tet_faces(tet: &[usize; 4]) -> [[usize; 3]; 4] {
    [
        [tet[0], tet[1], tet[2]],
        [tet[0], tet[1], tet[3]],
        [tet[0], tet[2], tet[3]],
        [tet[1], tet[2], tet[3]],
    ]
}

/// Reorders a face so its normal has positive dot product with the vector
/// from the owning tet's centroid to the face centroid.
fn orient_outward(nodes: &[Vec3], tet: &[usize; 4], face: [usize; 3]) -> [usize; 3] {
    let tet_centroid =
        (nodes[tet[0]] + nodes[tet[1]] + nodes[tet[2]] + nodes[tet[3]]) / 4.0;
    let (a, b, c) = (nodes[face[0]], nodes[face[1]], nodes[face[2]]);
    let face_centroid = (a + b + c) / 3.0;
    let normal = (b - a).cross(&(c - a));
    if normal.dot(&(face_centroid - tet_centroid)) >= 0.0 {
        face
    } else {
        [face[0], face[2], face[1]]
    }
}

/// Area-weighted outward unit normal at each boundary node, keyed by node index.
pub fn boundary_node_normals(mesh: &TetMesh) -> HashMap<usize, Vec3> {
    let mut acc: HashMap<usize, Vec3> = HashMap::new();
    for tri in mesh.boundary_tris() {
        let (a, b, c) = (
            mesh.nodes[tri[0]],
            mesh.nodes[tri[1]],
            mesh.nodes[tri[2]],
        );
        let n = (b - a).cross(&(c - a)); // magnitude = 2x area
        for &v in tri {
            *acc.entry(v).or_insert_with(Vec3::zeros) += n;
        }
    }
    for n in acc.values_mut() {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    acc
}

/// A point cloud sampled from a surface, optionally with unit normals.
#[derive(Debug, Clone)]
pub struct SurfacePointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl SurfacePointCloud {
    pub fn new(points: Vec<Vec3>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} normals for {} points",
                    ns.len(),
                    points.len()
                )));
            }
            for (i, n) in ns.iter().enumerate() {
                if (n.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "normal {i} has length {} (must be unit within 1e-9)",
                        n.norm()
                    )));
                }
            }
        }
        Ok(Self { points, normals })
    }
}

/// Which part of the boundary supplies control-point candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceRegion {
    /// All boundary nodes.
    Entire,
    /// Nodes of a named patch, e.g. "posterior".
    Patch(String),
}

impl SurfaceRegion {
    /// Sorted candidate node indices for this region.
    pub fn candidate_nodes(&self, mesh: &TetMesh) -> Result<Vec<usize>> {
        match self {
            SurfaceRegion::Entire => Ok(mesh.boundary_nodes()),
            SurfaceRegion::Patch(name) => mesh.patch_nodes(name),
        }
    }
}

impl std::fmt::Display for SurfaceRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurfaceRegion::Entire => write!(f, "entire surface"),
            SurfaceRegion::Patch(name) => write!(f, "{name}"),
        }
    }
}

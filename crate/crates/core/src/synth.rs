//! Synthetic phantom cases with known ground truth.
//!
//! An ellipsoid stands in for the organ: deformations are driven from the
//! posterior surface by a forward FEM solve, sparse data is sampled from the
//! anterior surface of the deformed shape (plus a deliberate rigid offset
//! and noise), and interior nodes serve as subsurface targets for RMS TRE
//! scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::fem::{assemble_stiffness, solve_displacement, MaterialMatrix};
use crate::geometry::{boundary_node_normals, extract_boundary, TetLocator, TetMesh};
use crate::libr::{apply_rigid, Feature, FeatureData, FeatureKind};
use crate::{DVec, Error, Result, Vec3};

/// Ellipsoid phantom description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    /// Ellipsoid semi-axes in meters.
    pub semi_axes: [f64; 3],
    /// Target tet edge length in meters (grid spacing of the voxelization).
    pub target_edge_length: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            semi_axes: [0.14, 0.10, 0.07],
            target_edge_length: 0.008,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.semi_axes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "semi-axes {:?} must be positive",
                self.semi_axes
            )));
        }
        let min_axis = self.semi_axes.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.target_edge_length > 0.0) || self.target_edge_length >= min_axis / 3.0 {
            return Err(Error::InvalidParameter(format!(
                "edge length {} must be positive and below min semi-axis / 3 = {}",
                self.target_edge_length,
                min_axis / 3.0
            )));
        }
        Ok(())
    }
}

/// The six-tet (Kuhn) subdivision of a unit cube: each tet walks from corner
/// (0,0,0) to (1,1,1) along one axis permutation.
const CUBE_TET_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn cube_tets(corner: [i64; 3]) -> [[[i64; 3]; 4]; 6] {
    let mut out = [[[0i64; 3]; 4]; 6];
    for (t, perm) in CUBE_TET_PERMS.iter().enumerate() {
        let mut p = corner;
        out[t][0] = p;
        for (step, &axis) in perm.iter().enumerate() {
            p[axis] += 1;
            out[t][step + 1] = p;
        }
    }
    out
}

/// Builds tets over a set of grid cubes, keeping those accepted by `keep`.
/// Vertices are indexed in first-use order, which makes the construction
/// deterministic.
fn tets_from_cubes<F>(
    cubes: &[[i64; 3]],
    origin: Vec3,
    spacing: f64,
    mut keep: F,
) -> (Vec<Vec3>, Vec<[usize; 4]>)
where
    F: FnMut(&Vec3) -> bool,
{
    let mut vertex_ids: HashMap<[i64; 3], usize> = HashMap::new();
    let mut nodes: Vec<Vec3> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let grid_point = |g: [i64; 3]| -> Vec3 {
        Vec3::new(
            origin.x + g[0] as f64 * spacing,
            origin.y + g[1] as f64 * spacing,
            origin.z + g[2] as f64 * spacing,
        )
    };
    for corner in cubes {
        for tet in cube_tets(*corner) {
            let centroid = (grid_point(tet[0])
                + grid_point(tet[1])
                + grid_point(tet[2])
                + grid_point(tet[3]))
                / 4.0;
            if !keep(&centroid) {
                continue;
            }
            let mut ids = [0usize; 4];
            for (i, g) in tet.iter().enumerate() {
                let next = nodes.len();
                let id = *vertex_ids.entry(*g).or_insert_with(|| {
                    nodes.push(grid_point(*g));
                    next
                });
                ids[i] = id;
            }
            // Fix orientation: the odd permutations produce negative volume.
            if crate::geometry::tet_signed_volume(&nodes, &ids) < 0.0 {
                ids.swap(2, 3);
            }
            tets.push(ids);
        }
    }
    (nodes, tets)
}

/// Structured box mesh: `divisions` cubes per axis, each split into 6 tets.
pub fn mesh_box(origin: Vec3, size: Vec3, divisions: [usize; 3]) -> Result<TetMesh> {
    if divisions.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter("zero divisions".into()));
    }
    if size.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("box size must be positive".into()));
    }
    let spacing = size.x / divisions[0] as f64;
    // Allow anisotropic boxes by scaling after construction on a unit grid.
    let mut cubes = Vec::new();
    for i in 0..divisions[0] as i64 {
        for j in 0..divisions[1] as i64 {
            for k in 0..divisions[2] as i64 {
                cubes.push([i, j, k]);
            }
        }
    }
    let (mut nodes, tets) = tets_from_cubes(&cubes, origin, spacing, |_| true);
    let sy = size.y / (divisions[1] as f64 * spacing);
    let sz = size.z / (divisions[2] as f64 * spacing);
    for n in &mut nodes {
        n.y = origin.y + (n.y - origin.y) * sy;
        n.z = origin.z + (n.z - origin.z) * sz;
    }
    TetMesh::new(nodes, tets)
}

/// Every boundary edge must be shared by exactly two boundary triangles with
/// opposite orientation.
pub fn audit_closed_surface(tris: &[[usize; 3]]) -> Result<()> {
    let mut directed: HashMap<(usize, usize), i64> = HashMap::new();
    for tri in tris {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        if count != 1 || directed.get(&(b, a)).copied().unwrap_or(0) != 1 {
            return Err(Error::InvalidMesh(format!(
                "boundary edge ({a}, {b}) is not shared by exactly two opposite-oriented triangles"
            )));
        }
    }
    Ok(())
}

/// Voxelizes the ellipsoid interior (tets kept when their centroid is
/// inside), labels posterior/anterior patches by outward normal direction,
/// and audits that the boundary is a closed 2-manifold.
pub fn generate_phantom_mesh(spec: &PhantomSpec) -> Result<TetMesh> {
    spec.validate()?;
    let [ax, ay, az] = spec.semi_axes;
    let h = spec.target_edge_length;
    let inside =
        |p: &Vec3| (p.x / ax).powi(2) + (p.y / ay).powi(2) + (p.z / az).powi(2) <= 1.0;

    let nx = (2.0 * ax / h).ceil() as i64 + 2;
    let ny = (2.0 * ay / h).ceil() as i64 + 2;
    let nz = (2.0 * az / h).ceil() as i64 + 2;
    let origin = Vec3::new(
        -(nx as f64) * h / 2.0,
        -(ny as f64) * h / 2.0,
        -(nz as f64) * h / 2.0,
    );
    let mut cubes = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                cubes.push([i, j, k]);
            }
        }
    }
    let (nodes, tets) = tets_from_cubes(&cubes, origin, h, |c| inside(c));
    if tets.is_empty() {
        return Err(Error::InvalidMesh("phantom voxelization is empty".into()));
    }
    let boundary = extract_boundary(&nodes, &tets)?;
    audit_closed_surface(&boundary)?;

    let mesh = TetMesh::new(nodes, tets)?;
    let normals = boundary_node_normals(&mesh);
    let mut posterior = BTreeSet::new();
    let mut anterior = BTreeSet::new();
    for (&node, normal) in &normals {
        if normal.z < -0.3 {
            posterior.insert(node);
        } else if normal.z > 0.3 {
            anterior.insert(node);
        }
    }
    if posterior.is_empty() || anterior.is_empty() {
        return Err(Error::InvalidMesh(
            "phantom surface has an empty posterior or anterior patch".into(),
        ));
    }
    let mut patches = BTreeMap::new();
    patches.insert("posterior".to_string(), posterior);
    patches.insert("anterior".to_string(), anterior);
    mesh.with_patches(patches)
}

/// Forward FEM solve driven by constant displacements on 2-4 posterior
/// sub-patches; remaining posterior nodes stay fixed, the rest of the
/// boundary is traction-free. Bitwise reproducible for a fixed seed.
pub fn generate_ground_truth(
    mesh: &TetMesh,
    material: &MaterialMatrix,
    seed: u64,
    amplitude: f64,
) -> Result<DVec> {
    if amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "amplitude {amplitude} must be non-negative"
        )));
    }
    let posterior = mesh.patch_nodes("posterior")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_patches = rng.random_range(2..=4usize);

    // Farthest-point sub-patch seeds over the posterior nodes.
    let start = rng.random_range(0..posterior.len());
    let mut seeds = vec![posterior[start]];
    let mut min_d: Vec<f64> = posterior
        .iter()
        .map(|&n| (mesh.nodes()[n] - mesh.nodes()[posterior[start]]).norm_squared())
        .collect();
    while seeds.len() < n_patches {
        let (best, _) = min_d
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        seeds.push(posterior[best]);
        for (i, &n) in posterior.iter().enumerate() {
            let d = (mesh.nodes()[n] - mesh.nodes()[posterior[best]]).norm_squared();
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }

    // Posterior extent sets the sub-patch radius scale.
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &n in &posterior {
        lo = lo.inf(&mesh.nodes()[n]);
        hi = hi.sup(&mesh.nodes()[n]);
    }
    let extent = (hi - lo).norm();

    let mut patch_disp = Vec::with_capacity(n_patches);
    let mut patch_radius = Vec::with_capacity(n_patches);
    for _ in 0..n_patches {
        let dir = random_unit(&mut rng);
        let mag = amplitude * rng.random_range(0.5..1.0);
        patch_disp.push(dir * mag);
        patch_radius.push(extent * rng.random_range(0.15..0.3));
    }

    let mut system = assemble_stiffness(mesh, material)?;
    for &node in &posterior {
        let p = mesh.nodes()[node];
        let mut value = Vec3::zeros();
        for (s, &seed_node) in seeds.iter().enumerate() {
            if (p - mesh.nodes()[seed_node]).norm() <= patch_radius[s] {
                value = patch_disp[s];
                break;
            }
        }
        system.fix_node(node, value);
    }
    let solution = solve_displacement(&system)?;
    Ok(solution.u)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = Vec3::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// A subsurface validation target.
#[derive(Debug, Clone, Copy)]
pub struct TargetPair {
    pub undeformed: Vec3,
    /// Ground-truth position in data space (deformed, then rigid offset).
    pub deformed: Vec3,
}

/// A complete synthetic ground-truth bundle.
pub struct GroundTruthCase {
    pub mesh: TetMesh,
    /// True nodal displacement field, length 3M, mesh space (no rigid part).
    pub true_displacement: DVec,
    pub targets: Vec<TargetPair>,
    pub features: FeatureData,
    /// Rigid offset (tau, theta) carried by the data space.
    pub rigid_offset: (Vec3, Vec3),
}

/// Knobs for case generation.
#[derive(Debug, Clone, Copy)]
pub struct CaseConfig {
    pub phantom: PhantomSpec,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Posterior loading magnitude cap, meters.
    pub amplitude: f64,
    pub load_seed: u64,
    pub sample_seed: u64,
    /// Fraction of anterior nodes sampled into the surface cloud.
    pub coverage: f64,
    /// Isotropic Gaussian noise on sampled points, meters.
    pub noise_sigma: f64,
    pub target_count: usize,
    pub fiducial_count: usize,
    /// Norm of the deliberate rigid translation, meters.
    pub rigid_tau_norm: f64,
    /// Norm of the deliberate rigid rotation vector, radians.
    pub rigid_theta_norm: f64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomSpec::default(),
            youngs_modulus: 2100.0,
            poisson_ratio: 0.45,
            amplitude: 0.015,
            load_seed: 1,
            sample_seed: 2,
            coverage: 0.5,
            noise_sigma: 0.001,
            target_count: 60,
            fiducial_count: 0,
            rigid_tau_norm: 0.005,
            rigid_theta_norm: 3.0_f64.to_radians(),
        }
    }
}

/// Options for `sample_sparse_features`.
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub coverage: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub fiducial_count: usize,
}

/// Samples sparse data from the deformed configuration: a surface cloud of
/// anterior nodes (and optional boundary fiducials), moved by the rigid
/// offset and perturbed by Gaussian noise.
pub fn sample_sparse_features(
    mesh: &TetMesh,
    true_displacement: &DVec,
    rigid_offset: (Vec3, Vec3),
    options: &SampleOptions,
) -> Result<FeatureData> {
    if !(options.coverage > 0.0 && options.coverage <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coverage {} must lie in (0, 1]",
            options.coverage
        )));
    }
    if true_displacement.len() != 3 * mesh.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "displacement length {} vs {} nodes",
            true_displacement.len(),
            mesh.node_count()
        )));
    }
    let centroid = mesh.centroid();
    let (tau, theta) = rigid_offset;
    let deformed_data_point = |node: usize| -> Vec3 {
        let p = mesh.nodes()[node]
            + Vec3::new(
                true_displacement[3 * node],
                true_displacement[3 * node + 1],
                true_displacement[3 * node + 2],
            );
        apply_rigid(&[p], &tau, &theta, &centroid)[0]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let normal = Normal::new(0.0, options.noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
    let noise = |rng: &mut ChaCha8Rng| -> Vec3 {
        if options.noise_sigma > 0.0 {
            Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
        } else {
            Vec3::zeros()
        }
    };

    let anterior = mesh.patch_nodes("anterior")?;
    let n_points = (options.coverage * anterior.len() as f64).round() as usize;
    if n_points < 10 {
        return Err(Error::InvalidParameter(format!(
            "coverage {} of {} anterior nodes yields only {n_points} points (need >= 10)",
            options.coverage,
            anterior.len()
        )));
    }
    let mut picked = anterior.clone();
    picked.shuffle(&mut rng);
    picked.truncate(n_points);
    let cloud: Vec<Vec3> = picked
        .iter()
        .map(|&n| deformed_data_point(n) + noise(&mut rng))
        .collect();

    let mut features = vec![Feature {
        name: "anterior_cloud".to_string(),
        kind: FeatureKind::SurfaceCloud,
        weight: 1.0,
        points: cloud,
        counterparts: None,
    }];

    if options.fiducial_count > 0 {
        let mut boundary = mesh.boundary_nodes();
        if options.fiducial_count > boundary.len() {
            return Err(Error::InvalidParameter(format!(
                "{} fiducials requested but only {} boundary nodes",
                options.fiducial_count,
                boundary.len()
            )));
        }
        boundary.shuffle(&mut rng);
        boundary.truncate(options.fiducial_count);
        let counterparts: Vec<Vec3> = boundary.iter().map(|&n| mesh.nodes()[n]).collect();
        let points: Vec<Vec3> = boundary
            .iter()
            .map(|&n| deformed_data_point(n) + noise(&mut rng))
            .collect();
        features.push(Feature {
            name: "fiducials".to_string(),
            kind: FeatureKind::CorrespondedPoints,
            weight: 1.0,
            points,
            counterparts: Some(counterparts),
        });
    }

    FeatureData::new(features)
}

/// Generates a full case: mesh, ground-truth field, targets, and features.
pub fn generate_case(config: &CaseConfig) -> Result<GroundTruthCase> {
    let mesh = generate_phantom_mesh(&config.phantom)?;
    let material =
        crate::fem::isotropic_material_matrix(config.youngs_modulus, config.poisson_ratio)?;
    let true_displacement =
        generate_ground_truth(&mesh, &material, config.load_seed, config.amplitude)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.sample_seed.wrapping_add(0x7265_6769_6421));
    let tau = random_unit(&mut rng) * config.rigid_tau_norm;
    let theta = random_unit(&mut rng) * config.rigid_theta_norm;

    // Interior (non-boundary) nodes host the subsurface targets.
    let boundary: BTreeSet<usize> = mesh.boundary_nodes().into_iter().collect();
    let mut interior: Vec<usize> = (0..mesh.node_count())
        .filter(|n| !boundary.contains(n))
        .collect();
    if interior.len() < config.target_count {
        return Err(Error::InvalidParameter(format!(
            "requested {} targets but the phantom has only {} interior nodes",
            config.target_count,
            interior.len()
        )));
    }
    interior.shuffle(&mut rng);
    interior.truncate(config.target_count);

    let centroid = mesh.centroid();
    let targets: Vec<TargetPair> = interior
        .iter()
        .map(|&n| {
            let undeformed = mesh.nodes()[n];
            let moved = undeformed
                + Vec3::new(
                    true_displacement[3 * n],
                    true_displacement[3 * n + 1],
                    true_displacement[3 * n + 2],
                );
            TargetPair {
                undeformed,
                deformed: apply_rigid(&[moved], &tau, &theta, &centroid)[0],
            }
        })
        .collect();

    // Audit the advection invariant through the interpolation path.
    let locator = TetLocator::build(&mesh);
    let nodal: Vec<Vec3> = (0..mesh.node_count())
        .map(|n| {
            Vec3::new(
                true_displacement[3 * n],
                true_displacement[3 * n + 1],
                true_displacement[3 * n + 2],
            )
        })
        .collect();
    for t in targets.iter().take(8) {
        let interp = locator
            .interpolate(&t.undeformed, &nodal)
            .ok_or_else(|| Error::Numerical("target fell outside its own mesh".into()))?;
        let advected =
            apply_rigid(&[t.undeformed + interp], &tau, &theta, &centroid)[0];
        if (advected - t.deformed).norm() > 1e-9 {
            return Err(Error::Numerical(
                "target advection invariant violated".into(),
            ));
        }
    }

    let features = sample_sparse_features(
        &mesh,
        &true_displacement,
        (tau, theta),
        &SampleOptions {
            coverage: config.coverage,
            noise_sigma: config.noise_sigma,
            seed: config.sample_seed,
            fiducial_count: config.fiducial_count,
        },
    )?;

    Ok(GroundTruthCase {
        mesh,
        true_displacement,
        targets,
        features,
        rigid_offset: (tau, theta),
    })
}

/// TRE scores in millimeters.
#[derive(Debug, Clone)]
pub struct TreReport {
    pub rms_mm: f64,
    pub per_target_mm: Vec<f64>,
}

/// Advects each undeformed target through an estimated field (barycentric
/// interpolation of `displacement` plus the estimated rigid transform) and
/// scores against the true deformed targets.
pub fn rms_tre(
    case: &GroundTruthCase,
    displacement: &DVec,
    rigid: (Vec3, Vec3),
) -> Result<TreReport> {
    if displacement.len() != 3 * case.mesh.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "displacement length {} vs {} nodes",
            displacement.len(),
            case.mesh.node_count()
        )));
    }
    let locator = TetLocator::build(&case.mesh);
    let nodal: Vec<Vec3> = (0..case.mesh.node_count())
        .map(|n| {
            Vec3::new(
                displacement[3 * n],
                displacement[3 * n + 1],
                displacement[3 * n + 2],
            )
        })
        .collect();
    let centroid = case.mesh.centroid();
    let (tau, theta) = rigid;
    let mut per_target_mm = Vec::with_capacity(case.targets.len());
    for (i, t) in case.targets.iter().enumerate() {
        let interp = locator.interpolate(&t.undeformed, &nodal).ok_or(
            Error::TargetOutsideMesh {
                index: i,
                x: t.undeformed.x,
                y: t.undeformed.y,
                z: t.undeformed.z,
            },
        )?;
        let est = apply_rigid(&[t.undeformed + interp], &tau, &theta, &centroid)[0];
        per_target_mm.push((est - t.deformed).norm() * 1000.0);
    }
    let rms_mm = (per_target_mm.iter().map(|e| e * e).sum::<f64>()
        / per_target_mm.len() as f64)
        .sqrt();
    Ok(TreReport {
        rms_mm,
        per_target_mm,
    })
}

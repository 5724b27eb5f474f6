//! FEM verification: analytic oracles, eigen-audits, patch test, and the
//! perturb-and-relax basis contracts.

mod common;

use std::collections::BTreeSet;

use common::Lcg;
use elastreg::fem::{
    assemble_stiffness, build_fem_basis, element_b_matrix, isotropic_material_matrix,
    perturb_and_relax, response_matrices, solve_displacement, PerturbOptions,
};
use elastreg::geometry::{kmeans_control_points, SurfaceRegion, TetLocator, TetMesh};
use elastreg::kelvinlet::{build_rk_basis, kelvinlet_displacement, ElasticParams};
use elastreg::synth::mesh_box;
use elastreg::{DMat, DVec, Mat3, Vec3};

// Frozen from 40-digit evaluation of lambda = E nu / ((1+nu)(1-2nu)) and
// mu = E / (2(1+nu)) at E = 2100 Pa, nu = 0.45.
const LAMBDA_LIVER: f64 = 6517.2413793103448;
const MU_LIVER: f64 = 724.13793103448276;

#[test]
fn lame_constants_match_frozen_values() {
    let m = isotropic_material_matrix(2100.0, 0.45).unwrap();
    let d = m.matrix();
    // D11 = lambda + 2 mu, D12 = lambda, D44 = mu.
    assert!((d[(0, 1)] - LAMBDA_LIVER).abs() < 1e-10 * LAMBDA_LIVER);
    assert!((d[(3, 3)] - MU_LIVER).abs() < 1e-10 * MU_LIVER);
    assert!((d[(0, 0)] - (LAMBDA_LIVER + 2.0 * MU_LIVER)).abs() < 1e-10 * d[(0, 0)]);
}

#[test]
fn b_matrix_reproduces_random_linear_fields() {
    // Hand-differentiated oracle: for u = G x, the engineering Voigt strain
    // is (G00, G11, G22, G01+G10, G12+G21, G02+G20).
    let mut rng = Lcg::new(3);
    for _ in 0..50 {
        let verts = [
            rng.vec3(-1.0, 1.0),
            rng.vec3(-1.0, 1.0),
            rng.vec3(-1.0, 1.0),
            rng.vec3(-1.0, 1.0),
        ];
        let vol = (verts[1] - verts[0])
            .cross(&(verts[2] - verts[0]))
            .dot(&(verts[3] - verts[0]))
            / 6.0;
        if vol < 1e-3 {
            continue;
        }
        let op = element_b_matrix(&verts).unwrap();
        assert!((op.volume - vol).abs() < 1e-12 * vol.abs().max(1.0));
        let g = Mat3::from_fn(|_, _| rng.range(-2.0, 2.0));
        let mut u = nalgebra::SVector::<f64, 12>::zeros();
        for (i, v) in verts.iter().enumerate() {
            let d = g * v;
            u[3 * i] = d.x;
            u[3 * i + 1] = d.y;
            u[3 * i + 2] = d.z;
        }
        let s = op.b * u;
        let expect = [
            g[(0, 0)],
            g[(1, 1)],
            g[(2, 2)],
            g[(0, 1)] + g[(1, 0)],
            g[(1, 2)] + g[(2, 1)],
            g[(0, 2)] + g[(2, 0)],
        ];
        for c in 0..6 {
            assert!(
                (s[c] - expect[c]).abs() < 1e-12 * (1.0 + expect[c].abs()),
                "component {c}: {} vs {}",
                s[c],
                expect[c]
            );
        }
    }
}

#[test]
fn single_tet_stiffness_has_exactly_six_zero_eigenvalues() {
    let mesh = TetMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.011, 0.001, 0.0),
            Vec3::new(0.002, 0.009, 0.0),
            Vec3::new(0.001, 0.002, 0.0107),
        ],
        vec![[0, 1, 2, 3]],
    )
    .unwrap();
    let material = isotropic_material_matrix(2100.0, 0.45).unwrap();
    let sys = assemble_stiffness(&mesh, &material).unwrap();
    // Densify the 12x12 and eigendecompose (independent dense oracle).
    let mut dense = DMat::zeros(12, 12);
    for j in 0..12 {
        let mut e = DVec::zeros(12);
        e[j] = 1.0;
        dense.column_mut(j).copy_from(&sys.apply(&e));
    }
    let norm = dense.amax();
    let eig = nalgebra::SymmetricEigen::new(dense.clone());
    let mut zero = 0;
    let mut positive = 0;
    for &l in eig.eigenvalues.iter() {
        if l.abs() < 1e-9 * norm {
            zero += 1;
        } else {
            assert!(l > 0.0, "negative eigenvalue {l}");
            positive += 1;
        }
    }
    assert_eq!(zero, 6, "rigid modes");
    assert_eq!(positive, 6, "deformation modes");
}

#[test]
fn patch_test_affine_field_reproduced_at_interior_nodes() {
    let mesh = mesh_box(Vec3::new(-0.04, -0.03, -0.03), Vec3::new(0.08, 0.06, 0.06), [4, 3, 3])
        .unwrap();
    let material = isotropic_material_matrix(2100.0, 0.45).unwrap();
    let mut rng = Lcg::new(19);
    let g = Mat3::from_fn(|_, _| rng.range(-0.05, 0.05));
    let c = rng.vec3(-0.01, 0.01);
    let affine = |p: &Vec3| g * p + c;

    let mut sys = assemble_stiffness(&mesh, &material).unwrap();
    let boundary: BTreeSet<usize> = mesh.boundary_nodes().into_iter().collect();
    for &n in &boundary {
        sys.fix_node(n, affine(&mesh.nodes()[n]));
    }
    let sol = solve_displacement(&sys).unwrap();
    let scale = (0..mesh.node_count())
        .map(|n| affine(&mesh.nodes()[n]).norm())
        .fold(0.0f64, f64::max);
    for n in 0..mesh.node_count() {
        if boundary.contains(&n) {
            continue;
        }
        let got = Vec3::new(sol.u[3 * n], sol.u[3 * n + 1], sol.u[3 * n + 2]);
        let expect = affine(&mesh.nodes()[n]);
        assert!(
            (got - expect).norm() <= 1e-8 * scale,
            "interior node {n}: {:.3e}",
            (got - expect).norm() / scale
        );
    }
}

/// Uniaxial bar under end traction: fixed normal displacement at x = 0,
/// minimal pins to stop rigid motion, traction sigma on the x = L face.
fn bar_solution() -> (TetMesh, elastreg::fem::Solution, f64, f64, f64) {
    let (l, w) = (0.1, 0.02);
    let mesh = mesh_box(Vec3::zeros(), Vec3::new(l, w, w), [10, 2, 2]).unwrap();
    let e = 2100.0;
    let nu = 0.45;
    let sigma = 50.0;
    let material = isotropic_material_matrix(e, nu).unwrap();
    let mut sys = assemble_stiffness(&mesh, &material).unwrap();

    let on = |v: f64, t: f64| (v - t).abs() < 1e-12;
    for (n, p) in mesh.nodes().iter().enumerate() {
        if on(p.x, 0.0) {
            sys.dirichlet.insert(3 * n, 0.0);
            if on(p.y, 0.0) && on(p.z, 0.0) {
                sys.dirichlet.insert(3 * n + 1, 0.0);
                sys.dirichlet.insert(3 * n + 2, 0.0);
            }
            if on(p.y, w) && on(p.z, 0.0) {
                sys.dirichlet.insert(3 * n + 2, 0.0);
            }
        }
    }
    // Consistent nodal loads for constant traction on the x = L face.
    for tri in mesh.boundary_tris() {
        let pts = [
            mesh.nodes()[tri[0]],
            mesh.nodes()[tri[1]],
            mesh.nodes()[tri[2]],
        ];
        if pts.iter().all(|p| on(p.x, l)) {
            let area = 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).norm();
            for &v in tri {
                sys.loads[3 * v] += sigma * area / 3.0;
            }
        }
    }
    let sol = solve_displacement(&sys).unwrap();
    (mesh, sol, e, nu, sigma)
}

#[test]
fn uniaxial_bar_matches_hookes_law() {
    let (mesh, sol, e, nu, sigma) = bar_solution();
    let material = isotropic_material_matrix(e, nu).unwrap();
    let _ = material;
    // Analytic oracle: exx = sigma / E, eyy = ezz = -nu sigma / E.
    let exx_expect = sigma / e;
    let lat_expect = -nu * sigma / e;
    let mut checked = 0;
    for tet in mesh.tets() {
        let centroid = (mesh.nodes()[tet[0]]
            + mesh.nodes()[tet[1]]
            + mesh.nodes()[tet[2]]
            + mesh.nodes()[tet[3]])
            / 4.0;
        if centroid.x < 0.03 || centroid.x > 0.07 {
            continue; // interior elements only
        }
        let verts = [
            mesh.nodes()[tet[0]],
            mesh.nodes()[tet[1]],
            mesh.nodes()[tet[2]],
            mesh.nodes()[tet[3]],
        ];
        let op = element_b_matrix(&verts).unwrap();
        let mut u = nalgebra::SVector::<f64, 12>::zeros();
        for (i, &n) in tet.iter().enumerate() {
            u[3 * i] = sol.u[3 * n];
            u[3 * i + 1] = sol.u[3 * n + 1];
            u[3 * i + 2] = sol.u[3 * n + 2];
        }
        let s = op.b * u;
        assert!(
            (s[0] - exx_expect).abs() < 1e-6 * exx_expect.abs(),
            "exx {} vs {}",
            s[0],
            exx_expect
        );
        assert!((s[1] - lat_expect).abs() < 1e-6 * lat_expect.abs());
        assert!((s[2] - lat_expect).abs() < 1e-6 * lat_expect.abs());
        checked += 1;
    }
    assert!(checked > 10, "checked {checked} interior elements");
}

#[test]
fn reactions_balance_applied_loads() {
    let (_, sol, _, _, _) = bar_solution();
    // The bar carries 50 Pa * (0.02 m)^2 = 0.02 N of axial load.
    let mut total = [0.0f64; 3];
    for (&dof, &r) in &sol.reactions {
        total[dof % 3] += r;
    }
    // Reactions must cancel the applied load on each axis.
    assert!((total[0] + 0.02).abs() < 1e-6, "x: {:.3e}", total[0] + 0.02);
    assert!(total[1].abs() < 1e-6, "y: {:.3e}", total[1]);
    assert!(total[2].abs() < 1e-6, "z: {:.3e}", total[2]);
}

#[test]
fn fem_converges_to_kelvinlet_under_matched_boundary_data() {
    // Dirichlet data from the singular solution on the cube boundary plus
    // the matching point load at the center node make the singular field
    // the exact solution; the FEM error at a fixed probe then shrinks with
    // refinement.
    let e = 2100.0;
    let nu = 0.3;
    let params = ElasticParams::new(e, nu).unwrap();
    let material = isotropic_material_matrix(e, nu).unwrap();
    let force = Vec3::new(1.0, 0.0, 0.0);
    let probes = [
        Vec3::new(0.75, 0.5, 0.5),
        Vec3::new(0.5, 0.72, 0.5),
        Vec3::new(0.35, 0.38, 0.62),
    ];
    let mut errors = Vec::new();
    for divisions in [6usize, 10, 14] {
        let mesh = mesh_box(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), [divisions; 3]).unwrap();
        let center = mesh
            .nodes()
            .iter()
            .position(|p| (p - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-9)
            .expect("center node exists for even divisions");
        let mut sys = assemble_stiffness(&mesh, &material).unwrap();
        for n in mesh.boundary_nodes() {
            let r = mesh.nodes()[n] - Vec3::new(0.5, 0.5, 0.5);
            sys.fix_node(n, kelvinlet_displacement(&r, &force, &params).unwrap());
        }
        sys.add_load(center, force);
        let sol = solve_displacement(&sys).unwrap();

        let locator = TetLocator::build(&mesh);
        let nodal: Vec<Vec3> = (0..mesh.node_count())
            .map(|n| Vec3::new(sol.u[3 * n], sol.u[3 * n + 1], sol.u[3 * n + 2]))
            .collect();
        let mut err = 0.0;
        for p in &probes {
            let fem = locator.interpolate(p, &nodal).unwrap();
            let exact = kelvinlet_displacement(
                &(p - Vec3::new(0.5, 0.5, 0.5)),
                &force,
                &params,
            )
            .unwrap();
            err += (fem - exact).norm() / exact.norm();
        }
        errors.push(err / probes.len() as f64);
    }
    assert!(
        errors[0] > errors[1] && errors[1] > errors[2],
        "discrepancy not monotone: {errors:?}"
    );
}

fn liver_material() -> elastreg::fem::MaterialMatrix {
    isotropic_material_matrix(2100.0, 0.45).unwrap()
}

#[test]
fn perturb_and_relax_contracts() {
    let mesh = common::coarse_phantom();
    let material = liver_material();
    let cps = kmeans_control_points(mesh, &SurfaceRegion::Entire, 8, 5).unwrap();
    let magnitude = 1e-3;
    let index = 3;
    let d = perturb_and_relax(mesh, &cps, index, 1, &material, magnitude).unwrap();

    // Other control-point nodes stay pinned at exactly zero.
    for (i, &node) in cps.nearest_node().iter().enumerate() {
        if i == index {
            continue;
        }
        for c in 0..3 {
            assert_eq!(d[3 * node + c], 0.0, "cp {i} component {c}");
        }
    }

    // Linearity in the perturbation magnitude.
    let d2 = perturb_and_relax(mesh, &cps, index, 1, &material, 2.0 * magnitude).unwrap();
    let diff = (&d2 - &d * 2.0).norm();
    assert!(
        diff <= 1e-9 * d2.norm(),
        "magnitude scaling violated: {:.3e}",
        diff / d2.norm()
    );
}

#[test]
fn perturb_and_relax_far_field_matches_pinned_solve() {
    // Saint-Venant: away from the tile, releasing the point constraint and
    // spreading its reaction leaves the field nearly unchanged. Enough
    // control points that twice the tile radius still leaves a genuine far
    // field on the phantom.
    let mesh = common::coarse_phantom();
    let material = liver_material();
    let cps = kmeans_control_points(mesh, &SurfaceRegion::Entire, 16, 5).unwrap();
    let index = 2;
    let magnitude = 1e-3;

    // Stage-1-only reference: same constraint set, perturbed node pinned.
    let mut sys = assemble_stiffness(mesh, &material).unwrap();
    for (i, &node) in cps.nearest_node().iter().enumerate() {
        let mut v = Vec3::zeros();
        if i == index {
            v.y = magnitude;
        }
        sys.fix_node(node, v);
    }
    let stage1 = solve_displacement(&sys).unwrap().u;
    let relaxed = perturb_and_relax(mesh, &cps, index, 1, &material, magnitude).unwrap();

    // Tile radius around the control point.
    let candidates = mesh.boundary_nodes();
    let tile =
        elastreg::geometry::voronoi_tile(mesh, &cps, index, &candidates).unwrap();
    let cp = cps.positions()[index];
    let tile_radius = tile
        .iter()
        .map(|&n| (mesh.nodes()[n] - cp).norm())
        .fold(0.0f64, f64::max);

    let mut far_diff2 = 0.0;
    let mut far_ref2 = 0.0;
    for (n, p) in mesh.nodes().iter().enumerate() {
        if (p - cp).norm() > 2.0 * tile_radius {
            for c in 0..3 {
                let a = relaxed[3 * n + c];
                let b = stage1[3 * n + c];
                far_diff2 += (a - b) * (a - b);
                far_ref2 += b * b;
            }
        }
    }
    assert!(far_ref2 > 0.0, "no far-field nodes beyond 2x tile radius");
    let rel = (far_diff2 / far_ref2).sqrt();
    assert!(rel < 0.10, "far-field relative difference {rel:.3}");
}

#[test]
fn fem_basis_columns_reproduce_independent_calls() {
    let mesh = common::coarse_phantom();
    let material = liver_material();
    let cps = kmeans_control_points(mesh, &SurfaceRegion::Entire, 6, 2).unwrap();
    let options = PerturbOptions::default();
    let basis = build_fem_basis(mesh, &cps, &material, options).unwrap();
    assert_eq!(basis.nrows(), 3 * mesh.node_count());
    assert_eq!(basis.ncols(), 18);
    for (index, axis) in [(0usize, 0usize), (3, 1), (5, 2)] {
        let col = basis.column(3 * index + axis);
        let independent =
            perturb_and_relax(mesh, &cps, index, axis, &material, options.magnitude).unwrap()
                / options.magnitude;
        let num = (&independent - &col.clone_owned()).norm();
        assert!(
            num <= 1e-12 * independent.norm().max(1e-300),
            "cp {index} axis {axis}: {:.3e}",
            num / independent.norm()
        );
    }
}

#[test]
fn response_matrices_shared_path_on_both_bases() {
    let mesh = common::coarse_phantom();
    let material = liver_material();
    let params = ElasticParams::new(2100.0, 0.45).unwrap();
    let cps = kmeans_control_points(mesh, &SurfaceRegion::Entire, 5, 1).unwrap();

    let j_rk = build_rk_basis(mesh, &cps, 0.02, &params).unwrap();
    let j_fem = build_fem_basis(mesh, &cps, &material, PerturbOptions::default()).unwrap();

    let mut rng = Lcg::new(9);
    for j_u in [j_rk, j_fem] {
        let modes = j_u.ncols();
        let resp = response_matrices(mesh, j_u, &material).unwrap();
        assert_eq!(resp.j_strain.nrows(), 6 * mesh.tet_count());
        assert_eq!(resp.j_stress.nrows(), 6 * mesh.tet_count());

        // Gram symmetry and positive semidefiniteness.
        let gram = resp.gram();
        let asym = (gram - gram.transpose()).amax();
        assert!(asym <= 1e-9 * gram.amax(), "gram asymmetry {asym:.3e}");
        for _ in 0..100 {
            let alpha = DVec::from_fn(modes, |_, _| rng.range(-1.0, 1.0));
            let energy = (gram * &alpha).dot(&alpha);
            assert!(energy >= -1e-12 * gram.amax().max(1.0));
        }

        // A uniform-translation displacement has zero strain energy.
        let mut translation = DMat::zeros(3 * mesh.node_count(), 3);
        for n in 0..mesh.node_count() {
            for c in 0..3 {
                translation[(3 * n + c, c)] = 1.0;
            }
        }
        let t_resp = response_matrices(mesh, translation, &material).unwrap();
        let alpha = DVec::from_vec(vec![0.4, -0.7, 1.1]);
        let energy = (t_resp.gram() * &alpha).dot(&alpha);
        assert!(energy.abs() < 1e-10, "rigid translation energy {energy:.3e}");
    }
}

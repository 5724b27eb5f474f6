//! Shared fixtures and oracle helpers for the integration tests.
#![allow(dead_code)]

pub mod dd;

use std::sync::OnceLock;

use elastreg::geometry::TetMesh;
use elastreg::synth::{generate_phantom_mesh, PhantomSpec};
use elastreg::Vec3;

/// Liver-scale phantom at the default resolution (~10k nodes). Built once
/// per test binary.
pub fn default_phantom() -> &'static TetMesh {
    static MESH: OnceLock<TetMesh> = OnceLock::new();
    MESH.get_or_init(|| {
        generate_phantom_mesh(&PhantomSpec::default()).expect("default phantom generates")
    })
}

/// Coarse phantom for FEM-heavy tests (~1-2k nodes).
pub fn coarse_phantom() -> &'static TetMesh {
    static MESH: OnceLock<TetMesh> = OnceLock::new();
    MESH.get_or_init(|| {
        generate_phantom_mesh(&PhantomSpec {
            target_edge_length: 0.018,
            ..PhantomSpec::default()
        })
        .expect("coarse phantom generates")
    })
}

/// Simple deterministic LCG for test-side randomness that must not depend
/// on crate-under-test RNG choices.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn vec3(&mut self, lo: f64, hi: f64) -> Vec3 {
        Vec3::new(self.range(lo, hi), self.range(lo, hi), self.range(lo, hi))
    }

    pub fn unit_vec3(&mut self) -> Vec3 {
        loop {
            let v = self.vec3(-1.0, 1.0);
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }
}

/// A random rotation matrix built from two LCG unit vectors.
pub fn random_rotation(rng: &mut Lcg) -> elastreg::Mat3 {
    let a = rng.unit_vec3();
    let mut b = rng.unit_vec3();
    // Gram-Schmidt to an orthonormal frame.
    b = (b - a * a.dot(&b)).normalize();
    let c = a.cross(&b);
    elastreg::Mat3::from_columns(&[a, b, c])
}

/// Relative difference of two vectors with a small absolute floor.
pub fn rel_diff(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

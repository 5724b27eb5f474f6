//! Case directory layout: mesh.vtk, true_displacement.vtk, targets.csv,
//! features/*.csv, case.json.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{
    read_mesh_vtk, read_point_cloud_csv, read_targets_csv, write_field_vtk, write_mesh_vtk,
    write_point_cloud_csv, write_targets_csv,
};
use crate::libr::{Feature, FeatureData, FeatureKind};
use crate::synth::{CaseConfig, GroundTruthCase, PhantomSpec};
use crate::{DVec, Error, Result, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureJson {
    pub name: String,
    /// "surface_cloud" or "corresponded_points".
    pub kind: String,
    pub weight: f64,
    /// CSV path relative to the case directory.
    pub points: String,
    /// Counterpart CSV for corresponded features.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterparts: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseJson {
    pub semi_axes: [f64; 3],
    pub target_edge_length: f64,
    pub phantom_seed: u64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub amplitude: f64,
    pub load_seed: u64,
    pub sample_seed: u64,
    pub coverage: f64,
    pub noise_sigma: f64,
    pub target_count: usize,
    pub fiducial_count: usize,
    pub rigid_tau: [f64; 3],
    pub rigid_theta: [f64; 3],
    pub features: Vec<FeatureJson>,
}

/// Serializes a case plus the configuration that produced it.
pub fn write_case_dir(dir: &Path, case: &GroundTruthCase, config: &CaseConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::create_dir_all(dir.join("features"))?;
    write_mesh_vtk(&dir.join("mesh.vtk"), &case.mesh)?;
    write_field_vtk(
        &dir.join("true_displacement.vtk"),
        &case.mesh,
        "displacement",
        &case.true_displacement,
    )?;
    write_targets_csv(&dir.join("targets.csv"), &case.targets)?;

    let mut feature_entries = Vec::new();
    for f in case.features.features() {
        let points_rel = format!("features/{}.csv", f.name);
        write_point_cloud_csv(&dir.join(&points_rel), &f.points, None)?;
        let counterparts_rel = match (&f.kind, &f.counterparts) {
            (FeatureKind::CorrespondedPoints, Some(cps)) => {
                let rel = format!("features/{}_model.csv", f.name);
                write_point_cloud_csv(&dir.join(&rel), cps, None)?;
                Some(rel)
            }
            _ => None,
        };
        feature_entries.push(FeatureJson {
            name: f.name.clone(),
            kind: match f.kind {
                FeatureKind::SurfaceCloud => "surface_cloud".to_string(),
                FeatureKind::CorrespondedPoints => "corresponded_points".to_string(),
            },
            weight: f.weight,
            points: points_rel,
            counterparts: counterparts_rel,
        });
    }

    let (tau, theta) = case.rigid_offset;
    let json = CaseJson {
        semi_axes: config.phantom.semi_axes,
        target_edge_length: config.phantom.target_edge_length,
        phantom_seed: config.phantom.seed,
        youngs_modulus: config.youngs_modulus,
        poisson_ratio: config.poisson_ratio,
        amplitude: config.amplitude,
        load_seed: config.load_seed,
        sample_seed: config.sample_seed,
        coverage: config.coverage,
        noise_sigma: config.noise_sigma,
        target_count: config.target_count,
        fiducial_count: config.fiducial_count,
        rigid_tau: [tau.x, tau.y, tau.z],
        rigid_theta: [theta.x, theta.y, theta.z],
        features: feature_entries,
    };
    fs::write(
        dir.join("case.json"),
        serde_json::to_string_pretty(&json)? + "\n",
    )?;
    Ok(())
}

/// Loads a case directory back into memory.
pub fn read_case_dir(dir: &Path) -> Result<(GroundTruthCase, CaseJson)> {
    let json: CaseJson = serde_json::from_str(&fs::read_to_string(dir.join("case.json"))?)?;
    let mesh = read_mesh_vtk(&dir.join("mesh.vtk"))?;
    let (field_mesh, true_displacement) =
        crate::io::read_field_vtk(&dir.join("true_displacement.vtk"))?;
    if field_mesh.node_count() != mesh.node_count() {
        return Err(Error::Parse {
            path: dir.display().to_string(),
            message: format!(
                "true_displacement.vtk has {} nodes, mesh.vtk has {}",
                field_mesh.node_count(),
                mesh.node_count()
            ),
        });
    }
    let targets_raw = read_targets_csv(&dir.join("targets.csv"))?;

    let mut features = Vec::new();
    for entry in &json.features {
        let cloud = read_point_cloud_csv(&dir.join(&entry.points))?;
        let kind = match entry.kind.as_str() {
            "surface_cloud" => FeatureKind::SurfaceCloud,
            "corresponded_points" => FeatureKind::CorrespondedPoints,
            other => {
                return Err(Error::Parse {
                    path: dir.join("case.json").display().to_string(),
                    message: format!("unknown feature kind '{other}'"),
                })
            }
        };
        let counterparts = match (&kind, &entry.counterparts) {
            (FeatureKind::CorrespondedPoints, Some(rel)) => {
                Some(read_point_cloud_csv(&dir.join(rel))?.points)
            }
            (FeatureKind::CorrespondedPoints, None) => {
                return Err(Error::Parse {
                    path: dir.join("case.json").display().to_string(),
                    message: format!("corresponded feature '{}' lacks a counterpart file", entry.name),
                })
            }
            _ => None,
        };
        features.push(Feature {
            name: entry.name.clone(),
            kind,
            weight: entry.weight,
            points: cloud.points,
            counterparts,
        });
    }

    let case = GroundTruthCase {
        mesh,
        true_displacement,
        targets: targets_raw
            .into_iter()
            .map(|t| crate::synth::TargetPair {
                undeformed: t.undeformed,
                deformed: t.deformed,
            })
            .collect(),
        features: FeatureData::new(features)?,
        rigid_offset: (
            Vec3::new(json.rigid_tau[0], json.rigid_tau[1], json.rigid_tau[2]),
            Vec3::new(json.rigid_theta[0], json.rigid_theta[1], json.rigid_theta[2]),
        ),
    };
    Ok((case, json))
}

impl CaseJson {
    /// Reconstructs the generation config recorded in the file.
    pub fn to_config(&self) -> CaseConfig {
        CaseConfig {
            phantom: PhantomSpec {
                semi_axes: self.semi_axes,
                target_edge_length: self.target_edge_length,
                seed: self.phantom_seed,
            },
            youngs_modulus: self.youngs_modulus,
            poisson_ratio: self.poisson_ratio,
            amplitude: self.amplitude,
            load_seed: self.load_seed,
            sample_seed: self.sample_seed,
            coverage: self.coverage,
            noise_sigma: self.noise_sigma,
            target_count: self.target_count,
            fiducial_count: self.fiducial_count,
            rigid_tau_norm: Vec3::new(self.rigid_tau[0], self.rigid_tau[1], self.rigid_tau[2])
                .norm(),
            rigid_theta_norm: Vec3::new(
                self.rigid_theta[0],
                self.rigid_theta[1],
                self.rigid_theta[2],
            )
            .norm(),
        }
    }

    /// The recorded rigid offset as (tau, theta) vectors.
    pub fn rigid_offset(&self) -> (Vec3, Vec3) {
        (
            Vec3::new(self.rigid_tau[0], self.rigid_tau[1], self.rigid_tau[2]),
            Vec3::new(self.rigid_theta[0], self.rigid_theta[1], self.rigid_theta[2]),
        )
    }
}

/// Shared helper: a nodal displacement DVec viewed as per-node vectors.
pub fn displacement_as_vectors(displacement: &DVec) -> Vec<Vec3> {
    (0..displacement.len() / 3)
        .map(|n| {
            Vec3::new(
                displacement[3 * n],
                displacement[3 * n + 1],
                displacement[3 * n + 2],
            )
        })
        .collect()
}

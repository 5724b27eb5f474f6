//! CSV point clouds (x,y,z[,nx,ny,nz], meters) and target pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::geometry::SurfacePointCloud;
use crate::synth::TargetPair;
use crate::{Error, Result, Vec3};

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn write_point_cloud_csv(
    path: &Path,
    points: &[Vec3],
    normals: Option<&[Vec3]>,
) -> Result<()> {
    if let Some(ns) = normals {
        if ns.len() != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} normals for {} points",
                ns.len(),
                points.len()
            )));
        }
    }
    let mut f = fs::File::create(path)?;
    match normals {
        None => {
            writeln!(f, "x,y,z")?;
            for p in points {
                writeln!(f, "{},{},{}", p.x, p.y, p.z)?;
            }
        }
        Some(ns) => {
            writeln!(f, "x,y,z,nx,ny,nz")?;
            for (p, n) in points.iter().zip(ns) {
                writeln!(f, "{},{},{},{},{},{}", p.x, p.y, p.z, n.x, n.y, n.z)?;
            }
        }
    }
    Ok(())
}

pub fn read_point_cloud_csv(path: &Path) -> Result<SurfacePointCloud> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?
        .trim();
    let with_normals = match header {
        "x,y,z" => false,
        "x,y,z,nx,ny,nz" => true,
        other => return Err(parse_err(path, format!("unexpected header '{other}'"))),
    };
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        let expect = if with_normals { 6 } else { 3 };
        if vals.len() != expect {
            return Err(parse_err(
                path,
                format!("line {}: {} fields, expected {expect}", lineno + 2, vals.len()),
            ));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if with_normals {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    SurfacePointCloud::new(points, if with_normals { Some(normals) } else { None })
}

pub fn write_targets_csv(path: &Path, targets: &[TargetPair]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "x,y,z,x_deformed,y_deformed,z_deformed")?;
    for t in targets {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            t.undeformed.x, t.undeformed.y, t.undeformed.z, t.deformed.x, t.deformed.y, t.deformed.z
        )?;
    }
    Ok(())
}

pub fn read_targets_csv(path: &Path) -> Result<Vec<TargetPair>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?
        .trim();
    if header != "x,y,z,x_deformed,y_deformed,z_deformed" {
        return Err(parse_err(path, format!("unexpected header '{header}'")));
    }
    let mut targets = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 6 {
            return Err(parse_err(
                path,
                format!("line {}: {} fields, expected 6", lineno + 2, vals.len()),
            ));
        }
        targets.push(TargetPair {
            undeformed: Vec3::new(vals[0], vals[1], vals[2]),
            deformed: Vec3::new(vals[3], vals[4], vals[5]),
        });
    }
    Ok(targets)
}

//! Raw float32 volumes with a JSON sidecar header.
//!
//! Header: `{"dims": [nx,ny,nz], "spacing": [sx,sy,sz], "origin": [ox,oy,oz],
//! "data": "relative/path.raw"}` with spacing and origin in meters. Voxel
//! (i,j,k) is centered at origin + (index + 0.5) * spacing, stored x-fastest.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub data: String,
}

#[derive(Debug, Clone)]
pub struct Volume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    /// x-fastest voxel data, length dims[0]*dims[1]*dims[2].
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], data: Vec<f32>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "volume data length {} vs dims {:?} = {n} voxels",
                data.len(),
                dims
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            data,
        })
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + (i as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (j as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (k as f64 + 0.5) * self.spacing[2],
        )
    }

    /// Trilinear interpolation at a world point, clamped at the border.
    ///
    /// Fractional lattice coordinates within 1e-9 of a plane snap onto it,
    /// so exact-integer voxel shifts reproduce voxel values bitwise.
    pub fn sample_trilinear(&self, p: &Vec3) -> f32 {
        let mut idx = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let s = (p[a] - self.origin[a]) / self.spacing[a] - 0.5;
            let max_i = (self.dims[a] - 1) as f64;
            let s = s.clamp(0.0, max_i);
            let mut i0 = s.floor();
            let mut f = s - i0;
            if f < 1e-9 {
                f = 0.0;
            } else if f > 1.0 - 1e-9 {
                f = 0.0;
                i0 += 1.0;
            }
            let i0 = (i0 as usize).min(self.dims[a] - 1);
            idx[a] = i0;
            frac[a] = f;
        }
        let up = |a: usize| (idx[a] + 1).min(self.dims[a] - 1);
        if frac == [0.0, 0.0, 0.0] {
            return self.at(idx[0], idx[1], idx[2]);
        }
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let c000 = self.at(idx[0], idx[1], idx[2]) as f64;
        let c100 = self.at(up(0), idx[1], idx[2]) as f64;
        let c010 = self.at(idx[0], up(1), idx[2]) as f64;
        let c110 = self.at(up(0), up(1), idx[2]) as f64;
        let c001 = self.at(idx[0], idx[1], up(2)) as f64;
        let c101 = self.at(up(0), idx[1], up(2)) as f64;
        let c011 = self.at(idx[0], up(1), up(2)) as f64;
        let c111 = self.at(up(0), up(1), up(2)) as f64;
        let c00 = c000 * (1.0 - fx) + c100 * fx;
        let c10 = c010 * (1.0 - fx) + c110 * fx;
        let c01 = c001 * (1.0 - fx) + c101 * fx;
        let c11 = c011 * (1.0 - fx) + c111 * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        (c0 * (1.0 - fz) + c1 * fz) as f32
    }
}

/// Reads a volume given its JSON header path; the raw path is resolved
/// relative to the header's directory.
pub fn read_volume(header_path: &Path) -> Result<Volume> {
    let header: VolumeHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    let raw_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.data);
    let mut bytes = Vec::new();
    fs::File::open(&raw_path)?.read_to_end(&mut bytes)?;
    let n = header.dims[0] * header.dims[1] * header.dims[2];
    if bytes.len() != 4 * n {
        return Err(Error::Parse {
            path: raw_path.display().to_string(),
            message: format!("raw size {} bytes vs dims {:?} = {} bytes", bytes.len(), header.dims, 4 * n),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Volume::new(header.dims, header.spacing, header.origin, data)
}

/// Writes `header_path` (JSON) plus the raw data file next to it.
pub fn write_volume(header_path: &Path, volume: &Volume, raw_name: &str) -> Result<()> {
    let header = VolumeHeader {
        dims: volume.dims,
        spacing: volume.spacing,
        origin: volume.origin,
        data: raw_name.to_string(),
    };
    fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    let raw_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(raw_name);
    let mut f = fs::File::create(raw_path)?;
    for v in &volume.data {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

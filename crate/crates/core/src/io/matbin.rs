//! Binary container for named float64 matrices.
//!
//! Layout: 8-byte magic, u32 matrix count, then per matrix a u32 name
//! length, the UTF-8 name, u64 rows, u64 cols, and rows*cols little-endian
//! f64 values in row-major order.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{DMat, Error, Result};

const MAGIC: &[u8; 8] = b"EMTX0001";

pub fn write_matrices(path: &Path, matrices: &[(&str, &DMat)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(matrices.len() as u32).to_le_bytes())?;
    for (name, m) in matrices {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(m.nrows() as u64).to_le_bytes())?;
        w.write_all(&(m.ncols() as u64).to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrices(path: &Path) -> Result<Vec<(String, DMat)>> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let parse_err = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(parse_err("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        if name_len > 4096 {
            return Err(parse_err(format!("implausible name length {name_len}")));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| parse_err(format!("matrix name: {e}")))?;
        r.read_exact(&mut u64buf)?;
        let rows = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u64buf)?;
        let cols = u64::from_le_bytes(u64buf) as usize;
        let mut m = DMat::zeros(rows, cols);
        let mut row = vec![0u8; 8 * cols];
        for i in 0..rows {
            r.read_exact(&mut row)?;
            for j in 0..cols {
                m[(i, j)] = f64::from_le_bytes(row[8 * j..8 * j + 8].try_into().unwrap());
            }
        }
        out.push((name, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = std::env::temp_dir().join(format!("elastreg-mat-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let a = DMat::from_fn(7, 3, |i, j| (i as f64 - 2.5) * (j as f64 + 0.1) / 3.0);
        let b = DMat::from_fn(1, 5, |_, j| f64::EPSILON * j as f64);
        let p = dir.join("m.bin");
        write_matrices(&p, &[("j_u", &a), ("gram", &b)]).unwrap();
        let back = read_matrices(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "j_u");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].0, "gram");
        assert_eq!(back[1].1, b);
        std::fs::remove_dir_all(&dir).ok();
    }
}

//! VTK legacy ASCII unstructured-grid reader/writer.
//!
//! Subset: POINTS double, CELLS of type 10 (linear tets), an optional
//! POINT_DATA integer scalar array named "patch" (0 = unlabeled,
//! 1 = posterior, 2 = anterior), and an optional VECTORS double array.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::geometry::TetMesh;
use crate::{DVec, Error, Result, Vec3};

const TITLE: &str = "elastreg unstructured grid";

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn patch_code(mesh: &TetMesh, node: usize) -> i32 {
    if let Some(set) = mesh.patch_labels().get("posterior") {
        if set.contains(&node) {
            return 1;
        }
    }
    if let Some(set) = mesh.patch_labels().get("anterior") {
        if set.contains(&node) {
            return 2;
        }
    }
    0
}

fn render(mesh: &TetMesh, field: Option<(&str, &DVec)>) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(TITLE);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {} double\n", mesh.node_count()));
    for p in mesh.nodes() {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    out.push_str(&format!(
        "CELLS {} {}\n",
        mesh.tet_count(),
        5 * mesh.tet_count()
    ));
    for t in mesh.tets() {
        out.push_str(&format!("4 {} {} {} {}\n", t[0], t[1], t[2], t[3]));
    }
    out.push_str(&format!("CELL_TYPES {}\n", mesh.tet_count()));
    for _ in 0..mesh.tet_count() {
        out.push_str("10\n");
    }
    out.push_str(&format!("POINT_DATA {}\n", mesh.node_count()));
    out.push_str("SCALARS patch int 1\nLOOKUP_TABLE default\n");
    for n in 0..mesh.node_count() {
        out.push_str(&format!("{}\n", patch_code(mesh, n)));
    }
    if let Some((name, v)) = field {
        out.push_str(&format!("VECTORS {name} double\n"));
        for n in 0..mesh.node_count() {
            out.push_str(&format!("{} {} {}\n", v[3 * n], v[3 * n + 1], v[3 * n + 2]));
        }
    }
    out
}

/// Writes the mesh with its patch labels.
pub fn write_mesh_vtk(path: &Path, mesh: &TetMesh) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(render(mesh, None).as_bytes())?;
    Ok(())
}

/// Writes the mesh plus a per-node vector field (e.g. "displacement").
pub fn write_field_vtk(path: &Path, mesh: &TetMesh, name: &str, field: &DVec) -> Result<()> {
    if field.len() != 3 * mesh.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "field length {} vs {} nodes",
            field.len(),
            mesh.node_count()
        )));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(render(mesh, Some((name, field))).as_bytes())?;
    Ok(())
}

struct Parsed {
    mesh: TetMesh,
    field: Option<DVec>,
}

fn parse(path: &Path) -> Result<Parsed> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .skip(2) // version comment + title
        .flat_map(|l| l.split_whitespace())
        .peekable();

    let mut nodes: Vec<Vec3> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut patch: Vec<i32> = Vec::new();
    let mut field: Option<DVec> = None;

    macro_rules! next_tok {
        ($what:expr) => {
            tokens
                .next()
                .ok_or_else(|| parse_err(path, format!("unexpected end of file in {}", $what)))?
        };
    }
    macro_rules! next_num {
        ($ty:ty, $what:expr) => {
            next_tok!($what)
                .parse::<$ty>()
                .map_err(|e| parse_err(path, format!("{}: {e}", $what)))?
        };
    }

    while let Some(&tok) = tokens.peek() {
        match tok {
            "ASCII" | "DATASET" | "UNSTRUCTURED_GRID" => {
                tokens.next();
            }
            "POINTS" => {
                tokens.next();
                let n: usize = next_num!(usize, "POINTS count");
                let _ty = next_tok!("POINTS type");
                nodes.reserve(n);
                for _ in 0..n {
                    let x: f64 = next_num!(f64, "point x");
                    let y: f64 = next_num!(f64, "point y");
                    let z: f64 = next_num!(f64, "point z");
                    nodes.push(Vec3::new(x, y, z));
                }
            }
            "CELLS" => {
                tokens.next();
                let n: usize = next_num!(usize, "CELLS count");
                let _total: usize = next_num!(usize, "CELLS size");
                tets.reserve(n);
                for _ in 0..n {
                    let m: usize = next_num!(usize, "cell arity");
                    if m != 4 {
                        return Err(parse_err(path, format!("cell with {m} vertices, expected 4")));
                    }
                    let mut t = [0usize; 4];
                    for v in &mut t {
                        *v = next_num!(usize, "cell vertex");
                    }
                    tets.push(t);
                }
            }
            "CELL_TYPES" => {
                tokens.next();
                let n: usize = next_num!(usize, "CELL_TYPES count");
                for _ in 0..n {
                    let ty: u32 = next_num!(u32, "cell type");
                    if ty != 10 {
                        return Err(parse_err(path, format!("cell type {ty}, expected 10 (tet)")));
                    }
                }
            }
            "POINT_DATA" => {
                tokens.next();
                let n: usize = next_num!(usize, "POINT_DATA count");
                if n != nodes.len() {
                    return Err(parse_err(
                        path,
                        format!("POINT_DATA {n} vs {} points", nodes.len()),
                    ));
                }
            }
            "SCALARS" => {
                tokens.next();
                let name = next_tok!("SCALARS name").to_string();
                let _ty = next_tok!("SCALARS type");
                let _comps = next_tok!("SCALARS components");
                let lut = next_tok!("LOOKUP_TABLE keyword");
                if lut != "LOOKUP_TABLE" {
                    return Err(parse_err(path, "expected LOOKUP_TABLE after SCALARS"));
                }
                let _lut_name = next_tok!("LOOKUP_TABLE name");
                let mut values = Vec::with_capacity(nodes.len());
                for _ in 0..nodes.len() {
                    values.push(next_num!(i32, "scalar value"));
                }
                if name == "patch" {
                    patch = values;
                }
            }
            "VECTORS" => {
                tokens.next();
                let _name = next_tok!("VECTORS name");
                let _ty = next_tok!("VECTORS type");
                let mut v = DVec::zeros(3 * nodes.len());
                for i in 0..3 * nodes.len() {
                    v[i] = next_num!(f64, "vector component");
                }
                field = Some(v);
            }
            other => {
                return Err(parse_err(path, format!("unexpected token '{other}'")));
            }
        }
    }

    if nodes.is_empty() || tets.is_empty() {
        return Err(parse_err(path, "missing POINTS or CELLS section"));
    }
    let mut mesh = TetMesh::new(nodes, tets)?;
    if !patch.is_empty() {
        let boundary: BTreeSet<usize> = mesh.boundary_nodes().into_iter().collect();
        let mut posterior = BTreeSet::new();
        let mut anterior = BTreeSet::new();
        for (node, &code) in patch.iter().enumerate() {
            match code {
                0 => {}
                1 if boundary.contains(&node) => {
                    posterior.insert(node);
                }
                2 if boundary.contains(&node) => {
                    anterior.insert(node);
                }
                1 | 2 => {
                    return Err(parse_err(
                        path,
                        format!("patch label on interior node {node}"),
                    ));
                }
                other => {
                    return Err(parse_err(path, format!("unknown patch code {other}")));
                }
            }
        }
        let mut patches = BTreeMap::new();
        if !posterior.is_empty() {
            patches.insert("posterior".to_string(), posterior);
        }
        if !anterior.is_empty() {
            patches.insert("anterior".to_string(), anterior);
        }
        mesh = mesh.with_patches(patches)?;
    }
    Ok(Parsed { mesh, field })
}

/// Reads a mesh (patch labels included when present).
pub fn read_mesh_vtk(path: &Path) -> Result<TetMesh> {
    Ok(parse(path)?.mesh)
}

/// Reads a mesh plus its per-node vector field.
pub fn read_field_vtk(path: &Path) -> Result<(TetMesh, DVec)> {
    let parsed = parse(path)?;
    let field = parsed
        .field
        .ok_or_else(|| parse_err(path, "missing VECTORS array"))?;
    Ok((parsed.mesh, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::mesh_box;

    #[test]
    fn mesh_roundtrip_is_byte_identical() {
        let dir = std::env::temp_dir().join(format!("elastreg-vtk-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = mesh_box(Vec3::new(-0.1, 0.0, 0.3), Vec3::new(0.5, 0.25, 0.125), [3, 2, 2])
            .unwrap();
        let p1 = dir.join("a.vtk");
        let p2 = dir.join("b.vtk");
        write_mesh_vtk(&p1, &mesh).unwrap();
        let back = read_mesh_vtk(&p1).unwrap();
        assert_eq!(back.node_count(), mesh.node_count());
        assert_eq!(back.tet_count(), mesh.tet_count());
        write_mesh_vtk(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn field_roundtrip() {
        let dir = std::env::temp_dir().join(format!("elastreg-vtkf-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = mesh_box(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), [2, 2, 2]).unwrap();
        let field = DVec::from_fn(3 * mesh.node_count(), |i, _| (i as f64 * 0.7).sin() * 1e-3);
        let p = dir.join("f.vtk");
        write_field_vtk(&p, &mesh, "displacement", &field).unwrap();
        let (back_mesh, back_field) = read_field_vtk(&p).unwrap();
        assert_eq!(back_mesh.node_count(), mesh.node_count());
        assert_eq!(back_field, field);
        std::fs::remove_dir_all(&dir).ok();
    }
}

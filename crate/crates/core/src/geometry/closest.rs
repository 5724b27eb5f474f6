//! Exact point-to-surface distance queries.
//!
//! `closest_point_on_surface` is the brute-force reference; `TriangleGrid`
//! accelerates the same exact minimization with a uniform grid and a ring
//! search whose lower bound guarantees results identical to brute force.

use crate::{Error, Result, Vec3};

/// Closest point on a single triangle (a, b, c) to `p`, via the barycentric
/// region classification of the standard point-triangle algorithm.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;

    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Exact closest point over every triangle of a surface; returns
/// (foot point, triangle id, squared distance).
pub fn closest_point_on_surface(
    p: &Vec3,
    nodes: &[Vec3],
    tris: &[[usize; 3]],
) -> Result<(Vec3, usize, f64)> {
    if tris.is_empty() {
        return Err(Error::InvalidParameter("empty surface".into()));
    }
    let mut best = (Vec3::zeros(), 0usize, f64::INFINITY);
    for (ti, tri) in tris.iter().enumerate() {
        let q = closest_point_on_triangle(p, &nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]);
        let d2 = (p - q).norm_squared();
        if d2 < best.2 {
            best = (q, ti, d2);
        }
    }
    Ok(best)
}

/// Uniform grid over triangle bounding boxes for exact accelerated
/// closest-point queries.
pub struct TriangleGrid {
    nodes: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl TriangleGrid {
    pub fn build(nodes: &[Vec3], tris: &[[usize; 3]]) -> Result<Self> {
        if tris.is_empty() {
            return Err(Error::InvalidParameter("empty surface".into()));
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        let mut edge_sum = 0.0;
        for tri in tris {
            for &v in tri {
                lo = lo.inf(&nodes[v]);
                hi = hi.sup(&nodes[v]);
            }
            edge_sum += (nodes[tri[1]] - nodes[tri[0]]).norm()
                + (nodes[tri[2]] - nodes[tri[1]]).norm()
                + (nodes[tri[0]] - nodes[tri[2]]).norm();
        }
        let mean_edge = edge_sum / (3 * tris.len()) as f64;
        let cell = (mean_edge * 1.5).max(1e-12);
        let extent = hi - lo;
        let dims = [
            (extent.x / cell).ceil() as usize + 1,
            (extent.y / cell).ceil() as usize + 1,
            (extent.z / cell).ceil() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let clamp_cell = |v: f64, d: usize| -> usize {
            (v.max(0.0) as usize).min(d - 1)
        };
        for (ti, tri) in tris.iter().enumerate() {
            let mut tlo = Vec3::repeat(f64::INFINITY);
            let mut thi = Vec3::repeat(f64::NEG_INFINITY);
            for &v in tri {
                tlo = tlo.inf(&nodes[v]);
                thi = thi.sup(&nodes[v]);
            }
            let i0 = clamp_cell(((tlo.x - lo.x) / cell).floor(), dims[0]);
            let i1 = clamp_cell(((thi.x - lo.x) / cell).floor(), dims[0]);
            let j0 = clamp_cell(((tlo.y - lo.y) / cell).floor(), dims[1]);
            let j1 = clamp_cell(((thi.y - lo.y) / cell).floor(), dims[1]);
            let k0 = clamp_cell(((tlo.z - lo.z) / cell).floor(), dims[2]);
            let k1 = clamp_cell(((thi.z - lo.z) / cell).floor(), dims[2]);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    for k in k0..=k1 {
                        buckets[(i * dims[1] + j) * dims[2] + k].push(ti as u32);
                    }
                }
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            tris: tris.to_vec(),
            origin: lo,
            cell,
            dims,
            buckets,
        })
    }

    /// Exact closest point; identical result to `closest_point_on_surface`.
    pub fn closest(&self, p: &Vec3) -> (Vec3, usize, f64) {
        let clamp_cell = |v: f64, d: usize| -> usize {
            if v < 0.0 {
                0
            } else {
                (v as usize).min(d - 1)
            }
        };
        let ci = clamp_cell(((p.x - self.origin.x) / self.cell).floor(), self.dims[0]);
        let cj = clamp_cell(((p.y - self.origin.y) / self.cell).floor(), self.dims[1]);
        let ck = clamp_cell(((p.z - self.origin.z) / self.cell).floor(), self.dims[2]);

        let mut best = (Vec3::zeros(), 0usize, f64::INFINITY);
        let mut seen = vec![false; self.tris.len()];
        let max_ring = self.dims[0].max(self.dims[1]).max(self.dims[2]);

        for ring in 0..=max_ring {
            // Any triangle in a cell at Chebyshev ring distance r is at least
            // (r-1)*cell away from p, so once that bound exceeds the best
            // distance the search is complete.
            if ring >= 1 && best.2.is_finite() {
                let bound = (ring as f64 - 1.0) * self.cell;
                if bound * bound > best.2 {
                    break;
                }
            }
            self.for_ring_cells(ci, cj, ck, ring, |bucket| {
                for &t in bucket {
                    let ti = t as usize;
                    if seen[ti] {
                        continue;
                    }
                    seen[ti] = true;
                    let tri = &self.tris[ti];
                    let q = closest_point_on_triangle(
                        p,
                        &self.nodes[tri[0]],
                        &self.nodes[tri[1]],
                        &self.nodes[tri[2]],
                    );
                    let d2 = (p - q).norm_squared();
                    if d2 < best.2 {
                        best = (q, ti, d2);
                    }
                }
            });
        }
        best
    }

    /// Distance from `p` to the surface in meters.
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest(p).2.sqrt()
    }

    fn for_ring_cells<F: FnMut(&[u32])>(
        &self,
        ci: usize,
        cj: usize,
        ck: usize,
        ring: usize,
        mut f: F,
    ) {
        let r = ring as i64;
        let (ci, cj, ck) = (ci as i64, cj as i64, ck as i64);
        let (di, dj, dk) = (
            self.dims[0] as i64,
            self.dims[1] as i64,
            self.dims[2] as i64,
        );
        let visit = |i: i64, j: i64, k: i64, f: &mut F| {
            if i >= 0 && j >= 0 && k >= 0 && i < di && j < dj && k < dk {
                f(&self.buckets[((i * dj + j) * dk + k) as usize]);
            }
        };
        if r == 0 {
            visit(ci, cj, ck, &mut f);
            return;
        }
        for i in (ci - r)..=(ci + r) {
            for j in (cj - r)..=(cj + r) {
                for k in (ck - r)..=(ck + r) {
                    let cheb = (i - ci).abs().max((j - cj).abs()).max((k - ck).abs());
                    if cheb == r {
                        visit(i, j, k, &mut f);
                    }
                }
            }
        }
    }
}

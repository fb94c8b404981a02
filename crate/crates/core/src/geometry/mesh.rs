//! Triangle meshes: loading, validation, closest-point and signed-distance
//! queries, and ray parity support for volume estimation.
//!
//! Signed distance combines two pieces:
//! * magnitude — exact distance to the closest point on any triangle,
//!   found with a best-first traversal of an AABB tree;
//! * sign — generalized winding number of the surface around the query
//!   point, computed from per-triangle solid angles. Points with winding
//!   number above 0.5 are inside and get a negative sign. For watertight
//!   meshes this matches the usual inside/outside classification; for
//!   open meshes it degrades gracefully instead of failing.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Isometry3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::accel::{Aabb, TriBvh};

/// Indexed triangle mesh with `f64` vertices.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    total_area: f64,
    watertight: bool,
    bvh: TriBvh,
    aabb_lo: Point3<f64>,
    aabb_hi: Point3<f64>,
}

/// Triangles with area below this are rejected as degenerate.
const MIN_TRIANGLE_AREA: f64 = 1e-14;

impl TriMesh {
    /// Builds a mesh and validates it: indices in range, no degenerate
    /// (near-zero-area) triangles, at least one triangle.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Invalid("mesh has no triangles".into()));
        }
        for v in &vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::Invalid("mesh vertex has non-finite coordinate".into()));
            }
        }
        let n = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        for (ti, t) in triangles.iter().enumerate() {
            for &vi in t {
                if vi >= n {
                    return Err(Error::Invalid(format!(
                        "triangle {ti} references vertex {vi} but mesh has {n} vertices"
                    )));
                }
            }
            let a = triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if a < MIN_TRIANGLE_AREA {
                return Err(Error::Degenerate(format!(
                    "triangle {ti} is degenerate (area {a:.3e})"
                )));
            }
            areas.push(a);
        }
        let total_area = areas.iter().sum();
        let watertight = edges_pair_up(&triangles);

        let mut aabb_lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut aabb_hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut boxes = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let (a, b, c) = (&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
            let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in [a, b, c] {
                for i in 0..3 {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                    aabb_lo[i] = aabb_lo[i].min(p[i]);
                    aabb_hi[i] = aabb_hi[i].max(p[i]);
                }
            }
            boxes.push(Aabb { lo, hi });
            centroids.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
        }
        let bvh = TriBvh::build(&centroids, &boxes);

        Ok(TriMesh {
            vertices,
            triangles,
            areas,
            total_area,
            watertight,
            bvh,
            aabb_lo,
            aabb_hi,
        })
    }

    /// Loads an ASCII Wavefront OBJ file. Only `v` and triangular `f`
    /// records are accepted; `vn`/`vt`/comments are ignored, faces with
    /// more than three vertices or any other record kind are errors.
    pub fn load_obj(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap();
            match tag {
                "v" => {
                    let mut coords = [0.0f64; 3];
                    for c in coords.iter_mut() {
                        let tok = it.next().ok_or_else(|| {
                            Error::parse(path, lineno + 1, "vertex needs 3 coordinates")
                        })?;
                        *c = tok.parse().map_err(|_| {
                            Error::parse(path, lineno + 1, format!("bad coordinate {tok:?}"))
                        })?;
                    }
                    vertices.push(Point3::new(coords[0], coords[1], coords[2]));
                }
                "f" => {
                    let idxs: Vec<&str> = it.collect();
                    if idxs.len() != 3 {
                        return Err(Error::parse(
                            path,
                            lineno + 1,
                            format!("face has {} vertices; only triangles supported", idxs.len()),
                        ));
                    }
                    let mut tri = [0usize; 3];
                    for (k, tok) in idxs.iter().enumerate() {
                        // `f v`, `f v/vt`, `f v/vt/vn`, `f v//vn` all start
                        // with the vertex index.
                        let vref = tok.split('/').next().unwrap();
                        let i: i64 = vref.parse().map_err(|_| {
                            Error::parse(path, lineno + 1, format!("bad face index {tok:?}"))
                        })?;
                        if i < 1 {
                            return Err(Error::parse(
                                path,
                                lineno + 1,
                                "negative/zero face indices not supported",
                            ));
                        }
                        tri[k] = (i - 1) as usize;
                    }
                    triangles.push(tri);
                }
                "vn" | "vt" | "s" | "o" | "g" | "usemtl" | "mtllib" => {}
                other => {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("unsupported OBJ record {other:?}"),
                    ));
                }
            }
        }
        TriMesh::new(vertices, triangles)
    }

    /// Writes the mesh as ASCII OBJ (`v` then `f` records, 1-based).
    pub fn save_obj(&self, path: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z).expect("string write");
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("string write");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Per-triangle surface areas, in input order.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// True when every edge is shared by exactly two triangles (with
    /// opposite orientation counted by the undirected pairing).
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn aabb(&self) -> (Point3<f64>, Point3<f64>) {
        (self.aabb_lo, self.aabb_hi)
    }

    /// Returns a copy with every vertex transformed by `iso`.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriMesh {
        let vertices: Vec<Point3<f64>> = self.vertices.iter().map(|p| iso * p).collect();
        TriMesh::new(vertices, self.triangles.clone())
            .expect("transforming a valid mesh preserves validity")
    }

    /// Vertices of triangle `t`.
    pub fn triangle(&self, t: usize) -> (Point3<f64>, Point3<f64>, Point3<f64>) {
        let [i, j, k] = self.triangles[t];
        (self.vertices[i], self.vertices[j], self.vertices[k])
    }

    /// Closest point on the surface, with the owning triangle index.
    pub fn closest_point(&self, query: &Point3<f64>) -> (Point3<f64>, usize) {
        let mut best_point = self.vertices[self.triangles[0][0]];
        let mut best_tri = 0usize;
        self.bvh.nearest(query, |t, mut bound| {
            let (a, b, c) = self.triangle(t);
            let p = closest_point_on_triangle(query, &a, &b, &c);
            let d2 = (p - query).norm_squared();
            if d2 < bound {
                bound = d2;
                best_point = p;
                best_tri = t;
            }
            bound
        });
        (best_point, best_tri)
    }

    /// Unsigned distance from `query` to the surface.
    pub fn distance(&self, query: &Point3<f64>) -> f64 {
        let (p, _) = self.closest_point(query);
        (p - query).norm()
    }

    /// Generalized winding number of the surface around `query`.
    /// ~1 inside a closed, outward-oriented surface; ~0 outside.
    pub fn winding_number(&self, query: &Point3<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.triangles {
            total += solid_angle(
                &self.vertices[t[0]],
                &self.vertices[t[1]],
                &self.vertices[t[2]],
                query,
            );
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Signed distance: negative inside (winding number > 0.5).
    pub fn signed_distance(&self, query: &Point3<f64>) -> f64 {
        let d = self.distance(query);
        if self.winding_number(query) > 0.5 {
            -d
        } else {
            d
        }
    }

    /// Parameters `x` where the ray `(x, y, z), x ∈ ℝ` crosses the surface,
    /// sorted ascending. Crossings tangent to triangle edges may repeat;
    /// callers that need parity should check `len() % 2` and fall back to
    /// winding-number classification when it is odd.
    pub fn x_crossings(&self, y: f64, z: f64, out: &mut Vec<f64>) {
        out.clear();
        for t in &self.triangles {
            let a = &self.vertices[t[0]];
            let b = &self.vertices[t[1]];
            let c = &self.vertices[t[2]];
            // Solve for barycentric coordinates in the (y, z) projection.
            let d00 = b.y - a.y;
            let d01 = c.y - a.y;
            let d10 = b.z - a.z;
            let d11 = c.z - a.z;
            let det = d00 * d11 - d01 * d10;
            if det.abs() < 1e-18 {
                continue; // Triangle is edge-on to the ray direction.
            }
            let py = y - a.y;
            let pz = z - a.z;
            let u = (py * d11 - d01 * pz) / det;
            let v = (d00 * pz - py * d10) / det;
            // Half-open inclusion rule keeps shared edges from double
            // counting in the generic case.
            if u >= 0.0 && v >= 0.0 && u + v <= 1.0 {
                let x = a.x + u * (b.x - a.x) + v * (c.x - a.x);
                out.push(x);
            }
        }
        out.sort_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    }
}

fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Checks that each undirected edge appears exactly twice.
fn edges_pair_up(triangles: &[[usize; 3]]) -> bool {
    let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = (i.min(j), i.max(j));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts.values().all(|&c| c == 2)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, §5.1.5): classify `p` against the Voronoi regions of the
/// triangle's features and project accordingly.
pub(crate) fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
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

/// Signed solid angle subtended by triangle `abc` at `o`
/// (van Oosterom & Strackee 1983).
fn solid_angle(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>, o: &Point3<f64>) -> f64 {
    let ra: Vector3<f64> = a - o;
    let rb: Vector3<f64> = b - o;
    let rc: Vector3<f64> = c - o;
    let la = ra.norm();
    let lb = rb.norm();
    let lc = rc.norm();
    let num = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + rb.dot(&rc) * la + rc.dot(&ra) * lb;
    2.0 * num.atan2(den)
}

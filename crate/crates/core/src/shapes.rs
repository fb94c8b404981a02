//! Procedural test/fixture meshes: axis-aligned boxes and icospheres.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::geometry::TriMesh;

/// Axis-aligned box centered at the origin with the given full extents.
/// Faces are outward-oriented (counter-clockwise seen from outside).
pub fn box_mesh(size_x: f64, size_y: f64, size_z: f64) -> TriMesh {
    let hx = size_x / 2.0;
    let hy = size_y / 2.0;
    let hz = size_z / 2.0;
    let vertices = vec![
        Point3::new(-hx, -hy, -hz), // 0
        Point3::new(hx, -hy, -hz),  // 1
        Point3::new(hx, hy, -hz),   // 2
        Point3::new(-hx, hy, -hz),  // 3
        Point3::new(-hx, -hy, hz),  // 4
        Point3::new(hx, -hy, hz),   // 5
        Point3::new(hx, hy, hz),    // 6
        Point3::new(-hx, hy, hz),   // 7
    ];
    let triangles = vec![
        // -z
        [0, 2, 1],
        [0, 3, 2],
        // +z
        [4, 5, 6],
        [4, 6, 7],
        // -y
        [0, 1, 5],
        [0, 5, 4],
        // +y
        [3, 7, 6],
        [3, 6, 2],
        // -x
        [0, 4, 7],
        [0, 7, 3],
        // +x
        [1, 2, 6],
        [1, 6, 5],
    ];
    TriMesh::new(vertices, triangles).expect("box mesh is valid")
}

/// Unit cube: `box_mesh(1, 1, 1)`.
pub fn unit_cube() -> TriMesh {
    box_mesh(1.0, 1.0, 1.0)
}

/// Icosphere of the given radius: an icosahedron subdivided `subdivisions`
/// times, with every vertex projected onto the sphere. Subdivision 0 is the
/// raw icosahedron (20 triangles); each level quadruples the triangle count.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriMesh {
    // Golden-ratio icosahedron.
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = vec![
        Point3::new(-1.0, phi, 0.0),
        Point3::new(1.0, phi, 0.0),
        Point3::new(-1.0, -phi, 0.0),
        Point3::new(1.0, -phi, 0.0),
        Point3::new(0.0, -1.0, phi),
        Point3::new(0.0, 1.0, phi),
        Point3::new(0.0, -1.0, -phi),
        Point3::new(0.0, 1.0, -phi),
        Point3::new(phi, 0.0, -1.0),
        Point3::new(phi, 0.0, 1.0),
        Point3::new(-phi, 0.0, -1.0),
        Point3::new(-phi, 0.0, 1.0),
    ];
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mid = [0usize; 3];
            for (k, (i, j)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].into_iter().enumerate() {
                let key = (i.min(j), i.max(j));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = Point3::from((vertices[i].coords + vertices[j].coords) / 2.0);
                    vertices.push(m);
                    vertices.len() - 1
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([t[1], mid[1], mid[0]]);
            next.push([t[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }

    for v in &mut vertices {
        let n = v.coords.norm();
        v.coords *= radius / n;
    }
    TriMesh::new(vertices, triangles).expect("icosphere is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_dimensions() {
        let b = box_mesh(0.2, 0.4, 0.6);
        let (lo, hi) = b.aabb();
        assert_relative_eq!(hi.x - lo.x, 0.2, epsilon = 1e-15);
        assert_relative_eq!(hi.y - lo.y, 0.4, epsilon = 1e-15);
        assert_relative_eq!(hi.z - lo.z, 0.6, epsilon = 1e-15);
        assert!(b.is_watertight());
        // Surface area: 2(ab + bc + ca).
        let expected = 2.0 * (0.2 * 0.4 + 0.4 * 0.6 + 0.6 * 0.2);
        assert_relative_eq!(b.total_area(), expected, epsilon = 1e-12);
    }

    #[test]
    fn icosphere_counts_and_area() {
        let s0 = icosphere(0, 1.0);
        assert_eq!(s0.triangles().len(), 20);
        let s3 = icosphere(3, 1.0);
        assert_eq!(s3.triangles().len(), 20 * 4usize.pow(3));
        assert!(s3.is_watertight());
        // Area converges to 4π from below.
        let sphere_area = 4.0 * std::f64::consts::PI;
        assert!(s3.total_area() < sphere_area);
        assert!(s3.total_area() > 0.98 * sphere_area);
        // All vertices on the sphere.
        for v in s3.vertices() {
            assert_relative_eq!(v.coords.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn box_is_outward_oriented() {
        // Winding number at the center must be +1, not -1.
        let b = unit_cube();
        assert_relative_eq!(
            b.winding_number(&nalgebra::Point3::origin()),
            1.0,
            epsilon = 1e-9
        );
    }
}

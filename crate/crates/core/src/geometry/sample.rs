//! Seeded, area-weighted surface sampling.

use nalgebra::Point3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::cloud::PointCloud;
use crate::geometry::mesh::TriMesh;
use crate::math::seeded_rng;

/// Draws `count` points uniformly (by area) from the mesh surface.
///
/// Triangles are selected by inverse-CDF lookup over cumulative areas, and
/// positions within each triangle use the square-root barycentric warp,
/// so the density is uniform over the whole surface. The same `seed`
/// always yields the same points. `count = 0` returns an empty cloud.
pub fn sample_surface(mesh: &TriMesh, count: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = seeded_rng(seed);
    sample_surface_with(mesh, count, &mut rng)
}

/// Same as [`sample_surface`] but drawing from a caller-owned stream, so
/// several meshes can share one seeded generator.
pub fn sample_surface_with(
    mesh: &TriMesh,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud> {
    if count == 0 {
        return PointCloud::new(Vec::new());
    }
    let areas = mesh.areas();
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for &a in areas {
        acc += a;
        cdf.push(acc);
    }
    let total = acc;
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero total area".into()));
    }

    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.gen_range(0.0..total);
        let t = match cdf.binary_search_by(|probe| probe.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i.min(cdf.len() - 1),
        };
        let (a, b, c) = mesh.triangle(t);
        // sqrt warp: uniform over the triangle.
        let r1: f64 = rng.gen::<f64>();
        let r2: f64 = rng.gen::<f64>();
        let s = r1.sqrt();
        let w0 = 1.0 - s;
        let w1 = s * (1.0 - r2);
        let w2 = s * r2;
        points.push(Point3::from(
            a.coords * w0 + b.coords * w1 + c.coords * w2,
        ));
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn sampling_is_deterministic() {
        let cube = shapes::unit_cube();
        let a = sample_surface(&cube, 64, 42).unwrap();
        let b = sample_surface(&cube, 64, 42).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, b);
        let c = sample_surface(&cube, 64, 43).unwrap();
        assert!(a.points.iter().zip(&c.points).any(|(p, q)| p != q));
    }

    #[test]
    fn samples_lie_on_surface() {
        let cube = shapes::unit_cube();
        for p in &sample_surface(&cube, 500, 7).unwrap().points {
            // On a cube face one coordinate is ±0.5 and the others inside.
            let on_face = (0..3).any(|i| (p[i].abs() - 0.5).abs() < 1e-12);
            assert!(on_face, "sample {p:?} not on cube surface");
            assert!((0..3).all(|i| p[i].abs() <= 0.5 + 1e-12));
        }
    }

    #[test]
    fn sphere_samples_have_unit_mean_radius() {
        let sphere = shapes::icosphere(3, 1.0);
        let cloud = sample_surface(&sphere, 10_000, 5).unwrap();
        let mean_r: f64 =
            cloud.points.iter().map(|p| p.coords.norm()).sum::<f64>() / cloud.len() as f64;
        assert!((mean_r - 1.0).abs() < 0.01, "mean radius {mean_r}");
    }

    #[test]
    fn area_weighting_balances_faces() {
        // Box with one pair of faces 10x the area of the others: samples
        // should concentrate there in proportion.
        let b = shapes::box_mesh(2.0, 2.0, 0.1);
        let pts = sample_surface(&b, 4000, 3).unwrap();
        // Large faces are z = ±0.05 (area 4 each); the four side walls have
        // area 0.2 each. Expect ~8/8.8 of samples on the large faces.
        let on_large = pts
            .points
            .iter()
            .filter(|p| (p.z.abs() - 0.05).abs() < 1e-9)
            .count() as f64;
        let frac = on_large / 4000.0;
        assert!((frac - 8.0 / 8.8).abs() < 0.03, "fraction {frac}");
    }

    #[test]
    fn zero_count_gives_empty_cloud() {
        let cube = shapes::unit_cube();
        let cloud = sample_surface(&cube, 0, 1).unwrap();
        assert!(cloud.is_empty());
    }
}

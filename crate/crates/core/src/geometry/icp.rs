//! Iterative closest point registration with closed-form similarity fits.
//!
//! Each iteration pairs every source point with its nearest point on the
//! target (a cloud, or a mesh surface), optionally drops the worst
//! correspondences (trimming), and refits rotation/translation — and,
//! when requested, a uniform scale — in closed form via the SVD-based
//! orthogonal Procrustes solution. Because clean reconstructions are rare
//! in practice, trimming is on by default.
//!
//! Initialization tries centroid alignment combined with four sign
//! combinations of principal-axes rotations; the candidate with the best
//! final residual wins. This recovers large rotations without requiring a
//! caller-supplied guess.

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::accel::KdTree3;
use crate::geometry::cloud::PointCloud;
use crate::geometry::mesh::TriMesh;

/// Rigid motion plus uniform scale: `p ↦ scale · (R p) + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply(p)).collect(),
            segments: cloud.segments.clone(),
        }
    }

    /// The rigid part as an isometry; errors if scale deviates from 1.
    pub fn to_isometry(&self) -> Result<nalgebra::Isometry3<f64>> {
        if (self.scale - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "transform has scale {}, not rigid",
                self.scale
            )));
        }
        Ok(nalgebra::Isometry3::from_parts(
            self.translation.into(),
            self.rotation,
        ))
    }
}

/// Registration target: a point cloud (nearest-neighbor correspondences)
/// or a mesh surface (closest-point correspondences).
pub enum IcpTarget<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriMesh),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpOptions {
    /// Also fit a uniform scale (off: rigid-only).
    pub estimate_scale: bool,
    pub max_iters: usize,
    /// Stop once the trimmed RMS improves by less than this (meters).
    pub tol: f64,
    /// Fraction of the worst correspondences excluded from each fit.
    pub trim_fraction: f64,
}

impl Default for IcpOptions {
    fn default() -> Self {
        IcpOptions {
            estimate_scale: false,
            max_iters: 200,
            tol: 1e-10,
            trim_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    /// RMS distance over the trimmed correspondence set.
    pub rms: f64,
    pub iterations: usize,
}

enum TargetIndex<'a> {
    Cloud(KdTree3),
    Mesh(&'a TriMesh),
}

impl TargetIndex<'_> {
    fn closest(&self, p: &Point3<f64>) -> Point3<f64> {
        match self {
            TargetIndex::Cloud(tree) => {
                let (i, _) = tree.nearest(p).expect("target cloud nonempty");
                tree.point(i)
            }
            TargetIndex::Mesh(mesh) => mesh.closest_point(p).0,
        }
    }
}

/// Registers `source` onto `target`, returning the best transform found and
/// its trimmed RMS residual. Non-convergence is not an error; inspect
/// `rms` to judge the fit.
pub fn icp_align(source: &PointCloud, target: IcpTarget<'_>, opts: &IcpOptions) -> Result<IcpResult> {
    if source.len() < 3 {
        return Err(Error::Degenerate(format!(
            "ICP needs at least 3 source points, got {}",
            source.len()
        )));
    }
    if !(0.0..1.0).contains(&opts.trim_fraction) {
        return Err(Error::Invalid(format!(
            "trim_fraction must be in [0, 1), got {}",
            opts.trim_fraction
        )));
    }
    let keep = keep_count(source.len(), opts.trim_fraction);
    if keep < 3 {
        return Err(Error::Invalid(
            "trim_fraction leaves fewer than 3 correspondences".into(),
        ));
    }

    let (src_centroid, src_axes, src_spread) = principal_axes(&source.points)?;
    if src_spread[1] <= 1e-12 * src_spread[0].max(1e-300) {
        return Err(Error::Degenerate(
            "ICP source points are collinear or coincident".into(),
        ));
    }

    let target_points: Vec<Point3<f64>>;
    let index = match target {
        IcpTarget::Cloud(c) => {
            if c.is_empty() {
                return Err(Error::Degenerate("ICP target cloud is empty".into()));
            }
            target_points = c.points.clone();
            TargetIndex::Cloud(KdTree3::build(&c.points))
        }
        IcpTarget::Mesh(m) => {
            target_points = m.vertices().to_vec();
            TargetIndex::Mesh(m)
        }
    };
    let (tgt_centroid, tgt_axes, _) = principal_axes(&target_points)?;

    // Four proper-rotation sign combinations of the principal axes.
    let signs = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let mut best: Option<IcpResult> = None;
    for s in signs {
        let flipped = Matrix3::from_columns(&[
            tgt_axes.column(0) * s[0],
            tgt_axes.column(1) * s[1],
            tgt_axes.column(2) * s[2],
        ]);
        let rot_mat = flipped * src_axes.transpose();
        let rotation = UnitQuaternion::from_matrix(&rot_mat);
        let init = SimilarityTransform {
            rotation,
            translation: tgt_centroid.coords - rotation * src_centroid.coords,
            scale: 1.0,
        };
        let run = icp_run(source, &index, init, keep, opts);
        if best.as_ref().is_none_or(|b| run.rms < b.rms) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one initialization ran"))
}

fn keep_count(n: usize, trim_fraction: f64) -> usize {
    (((n as f64) * (1.0 - trim_fraction)).ceil() as usize).min(n)
}

fn icp_run(
    source: &PointCloud,
    index: &TargetIndex<'_>,
    init: SimilarityTransform,
    keep: usize,
    opts: &IcpOptions,
) -> IcpResult {
    let mut current = init;
    let mut best = SimilarityTransform::identity();
    let mut best_rms = f64::INFINITY;
    let mut iterations = 0;

    // (source index, target point, squared residual), reused per iteration.
    let mut pairs: Vec<(usize, Point3<f64>, f64)> = Vec::with_capacity(source.len());
    for iter in 0..=opts.max_iters {
        pairs.clear();
        for (i, p) in source.points.iter().enumerate() {
            let tp = current.apply(p);
            let q = index.closest(&tp);
            pairs.push((i, q, (q - tp).norm_squared()));
        }
        pairs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal));
        pairs.truncate(keep);

        let rms = (pairs.iter().map(|p| p.2).sum::<f64>() / keep as f64).sqrt();
        let improvement = best_rms - rms;
        if rms < best_rms {
            best_rms = rms;
            best = current;
        }
        iterations = iter;
        if improvement < opts.tol || iter == opts.max_iters {
            break;
        }

        match fit_similarity(source, &pairs, opts.estimate_scale) {
            Some(next) => current = next,
            None => break, // Trimmed set collapsed; keep the best so far.
        }
    }

    IcpResult {
        transform: best,
        rms: best_rms,
        iterations,
    }
}

/// Closed-form weighted-free similarity fit (Umeyama 1991): finds
/// `argmin Σ ‖s·R·xᵢ + t − yᵢ‖²` over rotations, translations and —
/// optionally — uniform scale.
fn fit_similarity(
    source: &PointCloud,
    pairs: &[(usize, Point3<f64>, f64)],
    estimate_scale: bool,
) -> Option<SimilarityTransform> {
    let n = pairs.len() as f64;
    let mut mx = Vector3::zeros();
    let mut my = Vector3::zeros();
    for (i, y, _) in pairs {
        mx += source.points[*i].coords;
        my += y.coords;
    }
    mx /= n;
    my /= n;

    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (i, y, _) in pairs {
        let dx = source.points[*i].coords - mx;
        let dy = y.coords - my;
        cov += dy * dx.transpose();
        var_x += dx.norm_squared();
    }
    cov /= n;
    var_x /= n;
    if var_x <= 0.0 {
        return None;
    }

    let svd = cov.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut s = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rot_mat = u * s * vt;
    let rotation = UnitQuaternion::from_matrix(&rot_mat);
    let scale = if estimate_scale {
        let trace_ds = svd.singular_values[0] * s[(0, 0)]
            + svd.singular_values[1] * s[(1, 1)]
            + svd.singular_values[2] * s[(2, 2)];
        trace_ds / var_x
    } else {
        1.0
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let translation = my - scale * (rotation * mx);
    Some(SimilarityTransform {
        rotation,
        translation,
        scale,
    })
}

/// Centroid, right-handed principal-axes basis (columns, descending
/// variance), and the eigenvalue spectrum.
fn principal_axes(points: &[Point3<f64>]) -> Result<(Point3<f64>, Matrix3<f64>, [f64; 3])> {
    if points.is_empty() {
        return Err(Error::Degenerate("empty point set".into()));
    }
    let n = points.len() as f64;
    let mut mean = Vector3::zeros();
    for p in points {
        mean += p.coords;
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    // Sort descending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut basis = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]),
        eig.eigenvectors.column(order[1]),
        eig.eigenvectors.column(order[2]),
    ]);
    if basis.determinant() < 0.0 {
        let c2 = -basis.column(2);
        basis.set_column(2, &c2);
    }
    let spread = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    ];
    Ok((Point3::from(mean), basis, spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample::sample_surface;
    use crate::shapes;
    use approx::assert_relative_eq;
    use nalgebra::{Isometry3, Translation3};

    fn box_cloud(seed: u64) -> PointCloud {
        let b = shapes::box_mesh(0.12, 0.07, 0.04);
        sample_surface(&b, 400, seed).unwrap()
    }

    #[test]
    fn identity_on_same_cloud() {
        let c = box_cloud(1);
        let res = icp_align(&c, IcpTarget::Cloud(&c), &IcpOptions::default()).unwrap();
        assert!(res.rms < 1e-9, "rms {}", res.rms);
        assert!(res.transform.rotation.angle() < 1e-6);
        assert!(res.transform.translation.norm() < 1e-7);
    }

    #[test]
    fn recovers_rigid_transform() {
        let c = box_cloud(2);
        let iso = Isometry3::from_parts(
            Translation3::new(0.3, -0.1, 0.25),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.7, 0.2, -1.1)),
        );
        let moved = c.transformed(&iso);
        let res = icp_align(&c, IcpTarget::Cloud(&moved), &IcpOptions::default()).unwrap();
        assert!(res.rms < 1e-9, "rms {}", res.rms);
        let rot_err = res.transform.rotation.rotation_to(&iso.rotation).angle();
        assert!(rot_err < 0.1f64.to_radians(), "rotation error {rot_err}");
        let t_err = (res.transform.translation - iso.translation.vector).norm();
        assert!(t_err < 1e-4, "translation error {t_err}");
        assert_relative_eq!(res.transform.scale, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_scale() {
        let c = box_cloud(3);
        let scaled = PointCloud::new(
            c.points.iter().map(|p| Point3::from(p.coords * 1.2)).collect(),
        )
        .unwrap();
        let opts = IcpOptions {
            estimate_scale: true,
            ..IcpOptions::default()
        };
        let res = icp_align(&c, IcpTarget::Cloud(&scaled), &opts).unwrap();
        assert!((res.transform.scale - 1.2).abs() < 1e-3, "scale {}", res.transform.scale);
    }

    #[test]
    fn aligns_cloud_to_mesh() {
        let mesh = shapes::box_mesh(0.12, 0.07, 0.04);
        let c = sample_surface(&mesh, 300, 4).unwrap();
        let iso = Isometry3::from_parts(
            Translation3::new(-0.05, 0.2, 0.1),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.0, 0.8)),
        );
        // Register moved samples back onto the mesh surface.
        let moved = c.transformed(&iso);
        let res = icp_align(&moved, IcpTarget::Mesh(&mesh), &IcpOptions::default()).unwrap();
        assert!(res.rms < 1e-6, "rms {}", res.rms);
        // The recovered transform must undo `iso` up to box symmetry; check
        // that the registered points truly lie on the surface.
        for p in &res.transform.apply_cloud(&moved).points {
            assert!(mesh.distance(p) < 1e-6);
        }
    }

    #[test]
    fn trimming_survives_outliers() {
        let c = box_cloud(5);
        let iso = Isometry3::from_parts(
            Translation3::new(0.02, 0.05, -0.03),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.1, -0.2, 0.3)),
        );
        let mut noisy = c.transformed(&iso);
        // Corrupt 5% of the target points far away.
        let n = noisy.len();
        for i in 0..n / 20 {
            noisy.points[i * 20] += Vector3::new(1.0, 1.0, 1.0);
        }
        let res = icp_align(&c, IcpTarget::Cloud(&noisy), &IcpOptions::default()).unwrap();
        let rot_err = res.transform.rotation.rotation_to(&iso.rotation).angle();
        assert!(rot_err < 0.5f64.to_radians(), "rotation error {rot_err}");
    }

    #[test]
    fn collinear_source_rejected() {
        let line = PointCloud::new(
            (0..10).map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0)).collect(),
        )
        .unwrap();
        let c = box_cloud(6);
        let err = icp_align(&line, IcpTarget::Cloud(&c), &IcpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}

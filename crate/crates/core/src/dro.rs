//! The distance-matrix grasp codec.
//!
//! A grasp is encoded as the dense point-to-point distance matrix `D(R,O)`
//! between the posed robot surface cloud (rows, indexed like the robot's
//! [`LinkPointSet`]) and the object cloud (columns). Decoding inverts that:
//! every object point is a range anchor, so each robot point is recovered
//! by multilateration (algebraic linearization, then a short Gauss-Newton
//! range refinement), and a joint configuration is fitted to the recovered
//! cloud — closed-form rigid initialization from the root link's points,
//! then the shared damped Gauss-Newton solver over base pose and angles.
//!
//! Rows whose recovered position cannot explain their ranges (RMS residual
//! above [`INFEASIBLE_RMS`]) are flagged and excluded from the fit rather
//! than aborting the decode: predicted matrices are noisy by nature, and a
//! few bad rows should not spoil an otherwise consistent grasp.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::kinematics::{point_cloud_fk, JointConfig, LinkPointSet, RobotModel};
use crate::math::{hash_points, Pose};
use crate::optim::{solve_pose_angles, GnOptions};
use crate::pipeline::{GraspRecord, Provenance};

/// A multilaterated row whose refined RMS range residual exceeds this
/// (meters) is flagged infeasible and excluded from configuration fitting.
pub const INFEASIBLE_RMS: f64 = 0.01;

/// Relative eigenvalue threshold below which the multilateration normal
/// matrix is treated as rank-deficient (coplanar anchors).
const RANK_REL_TOL: f64 = 1e-10;

/// Gauss-Newton refinement steps per multilaterated point.
const REFINE_STEPS: usize = 10;

/// Dense nonnegative distances from every robot point to every object
/// point, row-major, with content hashes binding the clouds it was built
/// from. Stored as f64 in memory; the binary format rounds to f32.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: `data[i * cols + j]` is the robot-i-to-object-j distance.
    pub data: Vec<f64>,
    /// Hash of the robot cloud the matrix was encoded from (posed points).
    pub robot_points_hash: u64,
    /// Hash of the object cloud; decoding verifies this binding.
    pub object_points_hash: u64,
}

impl DistanceMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        robot_points_hash: u64,
        object_points_hash: u64,
    ) -> Result<Self> {
        let m = DistanceMatrix {
            rows,
            cols,
            data,
            robot_points_hash,
            object_points_hash,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Entry count, finiteness, and nonnegativity.
    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dim(
                self.rows * self.cols,
                self.data.len(),
                "distance matrix entries",
            ));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Invalid("distance matrix has no entries".into()));
        }
        for (k, &v) in self.data.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!(
                    "distance matrix entry {k} is {v}; entries must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Builds `D[i][j] = ‖robotᵢ − objectⱼ‖` from two nonempty clouds given in
/// the same frame. Invariant under a simultaneous rigid transform of both.
pub fn encode_distance_matrix(
    robot_cloud: &PointCloud,
    object_cloud: &PointCloud,
) -> Result<DistanceMatrix> {
    if robot_cloud.is_empty() {
        return Err(Error::Invalid("robot cloud is empty".into()));
    }
    if object_cloud.is_empty() {
        return Err(Error::Invalid("object cloud is empty".into()));
    }
    let mut data = Vec::with_capacity(robot_cloud.len() * object_cloud.len());
    for r in &robot_cloud.points {
        for o in &object_cloud.points {
            data.push((r - o).norm());
        }
    }
    Ok(DistanceMatrix {
        rows: robot_cloud.len(),
        cols: object_cloud.len(),
        data,
        robot_points_hash: hash_points(&robot_cloud.points),
        object_points_hash: hash_points(&object_cloud.points),
    })
}

/// Recovers the point at the given ranges from ≥ 4 non-coplanar anchors.
///
/// Subtracting the first sphere equation from the rest linearizes the
/// problem; the linear least-squares solution is then polished with up to
/// ten Gauss-Newton steps on the range residuals `‖x − aⱼ‖ − dⱼ`. Returns
/// the refined point and its RMS range residual, which is ≤ 1e-9 exactly
/// when the ranges are consistent.
pub fn multilaterate_point(anchors: &[Point3<f64>], dists: &[f64]) -> Result<(Point3<f64>, f64)> {
    if anchors.len() != dists.len() {
        return Err(Error::dim(anchors.len(), dists.len(), "range measurements"));
    }
    if anchors.len() < 4 {
        return Err(Error::Invalid(format!(
            "multilateration needs at least 4 anchors, got {}",
            anchors.len()
        )));
    }
    for (j, &d) in dists.iter().enumerate() {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::Invalid(format!(
                "range {j} is {d}; ranges must be finite and >= 0"
            )));
        }
    }

    // Row j: 2(aⱼ−a₀)ᵀx = ‖aⱼ‖² − ‖a₀‖² − dⱼ² + d₀², solved via the 3×3
    // normal equations.
    let a0 = anchors[0];
    let d0 = dists[0];
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (aj, &dj) in anchors.iter().zip(dists).skip(1) {
        let row = 2.0 * (aj - a0);
        let b = aj.coords.norm_squared() - a0.coords.norm_squared() - dj * dj + d0 * d0;
        ata += row * row.transpose();
        atb += row * b;
    }
    let eig = ata.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0 && lo > RANK_REL_TOL * hi) {
        return Err(Error::Degenerate(
            "multilateration anchors are coplanar (rank-deficient linear system)".into(),
        ));
    }
    let mut x = Point3::from(
        ata.lu()
            .solve(&atb)
            .ok_or_else(|| Error::Degenerate("multilateration normal equations singular".into()))?,
    );

    // Range refinement: plain Gauss-Newton with a halving safeguard.
    let cost = |p: &Point3<f64>| -> f64 {
        anchors
            .iter()
            .zip(dists)
            .map(|(a, &d)| {
                let r = (p - a).norm() - d;
                r * r
            })
            .sum()
    };
    let mut c = cost(&x);
    for _ in 0..REFINE_STEPS {
        let mut h = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for (a, &d) in anchors.iter().zip(dists) {
            let v = x - a;
            let n = v.norm().max(1e-12);
            let u = v / n;
            h += u * u.transpose();
            g += u * (n - d);
        }
        let Some(mut step) = h.lu().solve(&(-g)) else {
            break;
        };
        let mut improved = false;
        for _ in 0..5 {
            let cand = x + step;
            let cc = cost(&cand);
            if cc < c {
                x = cand;
                c = cc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || step.norm() < 1e-14 * (1.0 + x.coords.norm()) {
            break;
        }
    }
    Ok((x, (c / anchors.len() as f64).sqrt()))
}

/// A decoded robot cloud: recovered positions in robot-point order, the
/// per-row RMS range residuals, and the infeasibility flags.
#[derive(Debug, Clone)]
pub struct MultilateratedCloud {
    pub cloud: PointCloud,
    /// RMS range residual per robot point (meters).
    pub residuals: Vec<f64>,
    /// Rows whose residual exceeds [`INFEASIBLE_RMS`] (or whose solve
    /// failed); excluded from configuration fitting, never dropped.
    pub infeasible: Vec<bool>,
}

impl MultilateratedCloud {
    pub fn infeasible_count(&self) -> usize {
        self.infeasible.iter().filter(|&&f| f).count()
    }
}

/// Row-wise multilateration of a full matrix against its object cloud.
///
/// The cloud must be the one the matrix binds (hash-checked). Failed rows
/// are flagged infeasible and carry the anchor centroid as a placeholder
/// position so robot-point indexing is preserved.
pub fn multilaterate_cloud(
    d: &DistanceMatrix,
    object_cloud: &PointCloud,
) -> Result<MultilateratedCloud> {
    d.validate()?;
    if d.cols != object_cloud.len() {
        return Err(Error::dim(d.cols, object_cloud.len(), "object cloud size"));
    }
    let computed = hash_points(&object_cloud.points);
    if computed != d.object_points_hash {
        return Err(Error::HashMismatch {
            what: "object cloud bound to distance matrix".into(),
            stored: d.object_points_hash,
            computed,
        });
    }

    let centroid = object_cloud.centroid();
    let mut points = Vec::with_capacity(d.rows);
    let mut residuals = Vec::with_capacity(d.rows);
    let mut infeasible = Vec::with_capacity(d.rows);
    for i in 0..d.rows {
        match multilaterate_point(&object_cloud.points, d.row(i)) {
            Ok((p, rms)) => {
                points.push(p);
                residuals.push(rms);
                infeasible.push(!(rms.is_finite() && rms <= INFEASIBLE_RMS));
            }
            Err(e) if matches!(e.kind(), crate::ErrorKind::Internal) => return Err(e),
            Err(_) => {
                points.push(centroid);
                residuals.push(f64::INFINITY);
                infeasible.push(true);
            }
        }
    }
    Ok(MultilateratedCloud {
        cloud: PointCloud::new(points)?,
        residuals,
        infeasible,
    })
}

/// Fits (base, angles) so the posed link points match `target` by index:
/// closed-form rigid alignment of the root link's points seeds the base,
/// then damped Gauss-Newton refines everything under joint limits. Returns
/// the configuration and the RMS point error (meters).
pub fn fit_configuration(
    robot: &RobotModel,
    pts: &LinkPointSet,
    target: &PointCloud,
    q0: &JointConfig,
) -> Result<(JointConfig, f64)> {
    fit_configuration_weighted(robot, pts, target, None, q0)
}

/// [`fit_configuration`] with optional per-point weights (zero excludes a
/// point, e.g. infeasible multilateration rows).
pub fn fit_configuration_weighted(
    robot: &RobotModel,
    pts: &LinkPointSet,
    target: &PointCloud,
    weights: Option<&[f64]>,
    q0: &JointConfig,
) -> Result<(JointConfig, f64)> {
    q0.check_dims(robot)?;
    if pts.link_count() != robot.links.len() {
        return Err(Error::dim(robot.links.len(), pts.link_count(), "link point sets"));
    }
    if target.len() != pts.total() {
        return Err(Error::dim(pts.total(), target.len(), "target cloud size"));
    }
    if let Some(w) = weights {
        if w.len() != pts.total() {
            return Err(Error::dim(pts.total(), w.len(), "point weights"));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("point weights must be finite and >= 0".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    // Stage 1: the root link moves rigidly with the base, so its point
    // targets determine the base directly.
    let root = robot.root;
    let offset = pts.offset(root);
    let root_pts = pts.link_points(root);
    let usable = root_pts
        .iter()
        .enumerate()
        .filter(|&(k, _)| weight(offset + k) > 0.0)
        .count();
    if usable < 3 {
        return Err(Error::Invalid(format!(
            "root link {:?} needs at least 3 usable points for the rigid fit, got {usable}",
            robot.links[root].name
        )));
    }
    let src: Vec<Point3<f64>> = root_pts.to_vec();
    let dst: Vec<Point3<f64>> = target.points[offset..offset + root_pts.len()].to_vec();
    let wts: Vec<f64> = (0..root_pts.len()).map(|k| weight(offset + k)).collect();
    let mut base = crate::math::kabsch(&src, &dst, Some(&wts))?;
    let mut angles = q0.angles.clone();

    // Stage 2: refine all DoF on the weighted point residuals.
    let sqrt_w: Vec<f64> = (0..pts.total()).map(|i| weight(i).sqrt()).collect();
    let mut scratch = JointConfig::new(base, angles.clone());
    let limits = robot.limits();
    let gn = GnOptions {
        max_iters: 300,
        ..GnOptions::default()
    };
    solve_pose_angles(
        |b, a, out| {
            scratch.base = *b;
            scratch.angles.copy_from_slice(a);
            let posed = point_cloud_fk(robot, &scratch, pts).expect("dims validated");
            out.clear();
            for ((p, t), &sw) in posed.points.iter().zip(&target.points).zip(&sqrt_w) {
                let d = p - t;
                out.extend_from_slice(&[sw * d.x, sw * d.y, sw * d.z]);
            }
        },
        &mut base,
        &mut angles,
        &limits,
        &gn,
    );

    // Report the unweighted RMS over the points that counted.
    let fitted = JointConfig::new(base, angles);
    let posed = point_cloud_fk(robot, &fitted, pts)?;
    let mut sq = 0.0;
    let mut n = 0usize;
    for (i, (p, t)) in posed.points.iter().zip(&target.points).enumerate() {
        if weight(i) > 0.0 {
            sq += (p - t).norm_squared();
            n += 1;
        }
    }
    Ok((fitted, (sq / n.max(1) as f64).sqrt()))
}

/// Decodes a distance matrix into a grasp record: multilaterate every
/// robot point, then fit the configuration with infeasible rows excluded.
///
/// The record is expressed in the object cloud's frame (identity object
/// pose); its id and object id are derived from the matrix hashes, and
/// `fit_rms` / `infeasible_points` carry the decode diagnostics. When `q0`
/// is `None` the fit starts from the rest configuration translated so the
/// rest cloud's centroid sits on the recovered cloud's centroid.
pub fn decode_grasp(
    d: &DistanceMatrix,
    object_cloud: &PointCloud,
    robot: &RobotModel,
    pts: &LinkPointSet,
    q0: Option<&JointConfig>,
) -> Result<GraspRecord> {
    if d.rows != pts.total() {
        return Err(Error::dim(pts.total(), d.rows, "robot point rows"));
    }
    let decoded = multilaterate_cloud(d, object_cloud)?;

    let q0 = match q0 {
        Some(q) => q.clone(),
        None => {
            let mut rest = robot.rest_config();
            let rest_cloud = point_cloud_fk(robot, &rest, pts)?;
            rest.base.translation.vector +=
                decoded.cloud.centroid() - rest_cloud.centroid();
            rest
        }
    };
    let weights: Vec<f64> = decoded
        .infeasible
        .iter()
        .map(|&bad| if bad { 0.0 } else { 1.0 })
        .collect();
    let (q, rms) = fit_configuration_weighted(robot, pts, &decoded.cloud, Some(&weights), &q0)?;

    let mut record = GraspRecord::new(
        format!(
            "decoded-{:016x}",
            d.robot_points_hash ^ d.object_points_hash.rotate_left(32)
        ),
        robot.name.clone(),
        format!("object-{:016x}", d.object_points_hash),
        String::new(),
        Pose::identity(),
        &q,
        Provenance::Decoded,
    );
    record.fit_rms = Some(rms);
    record.infeasible_points = Some(decoded.infeasible_count());
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{load_robot, sample_link_points};
    use crate::math::seeded_rng;
    use crate::shapes::icosphere;
    use nalgebra::{Isometry3, UnitQuaternion};
    use rand::Rng;
    use std::path::Path;

    fn cloud(points: Vec<Point3<f64>>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    fn random_cloud(n: usize, rng: &mut impl Rng) -> PointCloud {
        cloud(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                    )
                })
                .collect(),
        )
    }

    fn toy_hand() -> (RobotModel, LinkPointSet) {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
        let robot = load_robot(&dir.join("toy_hand/hand.xml")).unwrap();
        let counts = vec![30; robot.links.len()];
        let pts = sample_link_points(&robot, &counts, 7).unwrap();
        (robot, pts)
    }

    fn sphere_cloud(n: usize, radius: f64, seed: u64) -> PointCloud {
        let mesh = icosphere(3, radius);
        crate::geometry::sample_surface(&mesh, n, seed).unwrap()
    }

    fn random_config(robot: &RobotModel, rng: &mut impl Rng) -> JointConfig {
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        JointConfig::new(
            Isometry3::from_parts(
                Vector3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                )
                .into(),
                UnitQuaternion::from_scaled_axis(axis * rng.gen_range(0.0..1.2)),
            ),
            robot
                .limits()
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..hi))
                .collect(),
        )
    }

    #[test]
    fn encode_identical_single_points_is_zero() {
        let a = cloud(vec![Point3::new(0.1, 0.2, 0.3)]);
        let d = encode_distance_matrix(&a, &a).unwrap();
        assert_eq!((d.rows, d.cols), (1, 1));
        assert_eq!(d.data, vec![0.0]);
    }

    #[test]
    fn encode_self_is_symmetric_with_zero_diagonal() {
        let mut rng = seeded_rng(1);
        let c = random_cloud(9, &mut rng);
        let d = encode_distance_matrix(&c, &c).unwrap();
        for i in 0..9 {
            assert_eq!(d.d(i, i), 0.0);
            for j in 0..9 {
                assert_eq!(d.d(i, j), d.d(j, i));
            }
        }
    }

    #[test]
    fn encode_matches_double_loop_oracle() {
        let mut rng = seeded_rng(2);
        let r = random_cloud(8, &mut rng);
        let o = random_cloud(5, &mut rng);
        let d = encode_distance_matrix(&r, &o).unwrap();
        for (i, rp) in r.points.iter().enumerate() {
            for (j, op) in o.points.iter().enumerate() {
                assert_eq!(d.d(i, j), (rp - op).norm());
            }
        }
        assert_eq!(d.robot_points_hash, hash_points(&r.points));
        assert_eq!(d.object_points_hash, hash_points(&o.points));
    }

    #[test]
    fn encode_rejects_empty_clouds() {
        let c = cloud(vec![Point3::origin()]);
        let empty = PointCloud::new(vec![]).unwrap();
        assert!(encode_distance_matrix(&empty, &c).is_err());
        assert!(encode_distance_matrix(&c, &empty).is_err());
    }

    #[test]
    fn encode_invariant_under_shared_rigid_transform() {
        let mut rng = seeded_rng(3);
        let r = random_cloud(12, &mut rng);
        let o = random_cloud(10, &mut rng);
        let d = encode_distance_matrix(&r, &o).unwrap();
        let iso = Isometry3::from_parts(
            Vector3::new(0.3, -0.7, 0.2).into(),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.9, -1.3, 0.5)),
        );
        let d2 = encode_distance_matrix(&r.transformed(&iso), &o.transformed(&iso)).unwrap();
        for (a, b) in d.data.iter().zip(&d2.data) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn matrix_validation_rejects_bad_entries() {
        assert!(DistanceMatrix::new(1, 2, vec![0.0], 0, 0).is_err(), "count");
        assert!(
            DistanceMatrix::new(1, 2, vec![0.1, -0.2], 0, 0).is_err(),
            "negative"
        );
        assert!(
            DistanceMatrix::new(1, 2, vec![0.1, f64::NAN], 0, 0).is_err(),
            "nan"
        );
        assert!(DistanceMatrix::new(0, 0, vec![], 0, 0).is_err(), "empty");
    }

    #[test]
    fn multilaterate_exact_ranges_recover_point() {
        let anchors = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.1),
            Point3::new(0.0, 1.2, -0.1),
            Point3::new(0.2, 0.1, 1.0),
            Point3::new(-0.8, 0.4, 0.3),
        ];
        let truth = Point3::new(0.31, -0.24, 0.55);
        let dists: Vec<f64> = anchors.iter().map(|a| (truth - a).norm()).collect();
        let (got, rms) = multilaterate_point(&anchors, &dists).unwrap();
        assert!((got - truth).norm() < 1e-9, "err {}", (got - truth).norm());
        assert!(rms < 1e-9, "rms {rms}");
    }

    #[test]
    fn multilaterate_tetrahedron_circumradius_gives_centroid() {
        // Vertices of a regular tetrahedron inscribed in the unit sphere,
        // shifted so the centroid is not the origin.
        let shift = Vector3::new(0.2, -0.1, 0.4);
        let anchors: Vec<Point3<f64>> = [
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ]
        .iter()
        .map(|p| Point3::from(p.coords / 3.0f64.sqrt() + shift))
        .collect();
        let dists = vec![1.0; 4]; // circumradius
        let (got, rms) = multilaterate_point(&anchors, &dists).unwrap();
        assert!((got.coords - shift).norm() < 1e-9);
        assert!(rms < 1e-9);
    }

    #[test]
    fn multilaterate_residual_detects_inconsistency() {
        let anchors = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let truth = Point3::new(0.2, 0.3, 0.1);
        let mut dists: Vec<f64> = anchors.iter().map(|a| (truth - a).norm()).collect();
        dists[2] += 0.05;
        let (_, rms) = multilaterate_point(&anchors, &dists).unwrap();
        assert!(rms > 1e-3, "rms {rms} should expose the bad range");
    }

    #[test]
    fn multilaterate_noisy_ranges_stay_below_noise_floor() {
        let mut rng = seeded_rng(4);
        let anchors: Vec<Point3<f64>> = (0..512)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                )
            })
            .collect();
        let truth = Point3::new(0.12, -0.08, 0.2);
        let gauss = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let dists: Vec<f64> = anchors
            .iter()
            .map(|a| ((truth - a).norm() + 1e-3 * gauss(&mut rng)).max(0.0))
            .collect();
        let (got, rms) = multilaterate_point(&anchors, &dists).unwrap();
        assert!(
            (got - truth).norm() < 1e-3,
            "err {} should beat the 1e-3 noise",
            (got - truth).norm()
        );
        assert!(rms < 2e-3, "rms {rms} should sit at the noise level");
    }

    #[test]
    fn multilaterate_rejects_bad_anchor_geometry() {
        let coplanar: Vec<Point3<f64>> = (0..6)
            .map(|k| Point3::new(k as f64 * 0.1, (k * k) as f64 * 0.05, 0.0))
            .collect();
        let dists = vec![1.0; 6];
        assert!(matches!(
            multilaterate_point(&coplanar, &dists),
            Err(Error::Degenerate(_))
        ));

        let few = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert!(multilaterate_point(&few, &[1.0, 1.0, 1.0]).is_err(), "3 anchors");
        assert!(
            multilaterate_point(&few, &[1.0, 1.0]).is_err(),
            "length mismatch"
        );

        let good = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        assert!(
            multilaterate_point(&good, &[1.0, 1.0, -0.1, 1.0]).is_err(),
            "negative range"
        );
    }

    #[test]
    fn cloud_round_trip_recovers_posed_robot() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(5);
        let q = random_config(&robot, &mut rng);
        let posed = point_cloud_fk(&robot, &q, &pts).unwrap();
        let object = sphere_cloud(96, 0.05, 11);
        let d = encode_distance_matrix(&posed, &object).unwrap();

        let decoded = multilaterate_cloud(&d, &object).unwrap();
        assert_eq!(decoded.cloud.len(), posed.len());
        assert_eq!(decoded.infeasible_count(), 0);
        for (got, want) in decoded.cloud.points.iter().zip(&posed.points) {
            assert!(
                (got - want).norm() < 1e-6,
                "err {}",
                (got - want).norm()
            );
        }
    }

    #[test]
    fn cloud_single_row_matrix_decodes_one_point() {
        let object = sphere_cloud(64, 0.05, 12);
        let p = Point3::new(0.02, -0.03, 0.08);
        let robot_cloud = cloud(vec![p]);
        let d = encode_distance_matrix(&robot_cloud, &object).unwrap();
        let decoded = multilaterate_cloud(&d, &object).unwrap();
        assert_eq!(decoded.cloud.len(), 1);
        assert!((decoded.cloud.points[0] - p).norm() < 1e-6);
    }

    #[test]
    fn cloud_corrupted_row_is_flagged_not_fatal() {
        let object = sphere_cloud(64, 0.05, 13);
        let points = vec![Point3::new(0.02, 0.0, 0.07), Point3::new(-0.01, 0.04, 0.06)];
        let robot_cloud = cloud(points.clone());
        let mut d = encode_distance_matrix(&robot_cloud, &object).unwrap();
        for v in d.data[..d.cols].iter_mut() {
            *v = 0.0; // row 0: claims to touch every anchor at once
        }
        let decoded = multilaterate_cloud(&d, &object).unwrap();
        assert!(decoded.infeasible[0], "corrupt row flagged");
        assert!(!decoded.infeasible[1], "healthy row unaffected");
        assert!((decoded.cloud.points[1] - points[1]).norm() < 1e-6);
    }

    #[test]
    fn cloud_rejects_mismatched_object_cloud() {
        let object = sphere_cloud(64, 0.05, 14);
        let robot_cloud = cloud(vec![Point3::new(0.0, 0.0, 0.1)]);
        let d = encode_distance_matrix(&robot_cloud, &object).unwrap();

        let other = sphere_cloud(48, 0.05, 14);
        assert!(multilaterate_cloud(&d, &other).is_err(), "size mismatch");

        let reseeded = sphere_cloud(64, 0.05, 15);
        assert!(
            matches!(
                multilaterate_cloud(&d, &reseeded),
                Err(Error::HashMismatch { .. })
            ),
            "same size, different points"
        );
    }

    #[test]
    fn fit_self_consistency_recovers_random_configs() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(6);
        for case in 0..5 {
            let truth = random_config(&robot, &mut rng);
            let target = point_cloud_fk(&robot, &truth, &pts).unwrap();
            let (q, rms) = fit_configuration(&robot, &pts, &target, &robot.rest_config()).unwrap();
            assert!(rms < 1e-6, "case {case}: rms {rms}");
            for (i, (a, t)) in q.angles.iter().zip(&truth.angles).enumerate() {
                assert!((a - t).abs() < 1e-3, "case {case} angle {i}: {a} vs {t}");
            }
        }
    }

    #[test]
    fn fit_rigid_case_reduces_to_kabsch() {
        let (robot, pts) = toy_hand();
        let rest = robot.rest_config();
        let rest_cloud = point_cloud_fk(&robot, &rest, &pts).unwrap();
        let iso = Isometry3::from_parts(
            Vector3::new(0.1, -0.05, 0.2).into(),
            UnitQuaternion::from_scaled_axis(Vector3::new(0.4, 0.9, -0.3)),
        );
        let target = rest_cloud.transformed(&iso);
        let (q, rms) = fit_configuration(&robot, &pts, &target, &rest).unwrap();
        assert!(rms < 1e-9, "rms {rms}");
        assert!(q.base.rotation.angle_to(&iso.rotation) < 1e-7);
        assert!((q.base.translation.vector - iso.translation.vector).norm() < 1e-8);
        for (a, r) in q.angles.iter().zip(&rest.angles) {
            assert!((a - r).abs() < 1e-6, "angles stay at rest");
        }
    }

    #[test]
    fn fit_noisy_target_stays_at_noise_floor_within_limits() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(8);
        let truth = random_config(&robot, &mut rng);
        let mut target = point_cloud_fk(&robot, &truth, &pts).unwrap();
        for p in &mut target.points {
            for k in 0..3 {
                p[k] += rng.gen_range(-1e-3..1e-3);
            }
        }
        let (q, rms) = fit_configuration(&robot, &pts, &target, &robot.rest_config()).unwrap();
        assert!(rms < 1.5e-3, "rms {rms} should sit at the noise floor");
        for (a, &(lo, hi)) in q.angles.iter().zip(&robot.limits()) {
            assert!(*a >= lo && *a <= hi, "limits respected");
        }
    }

    #[test]
    fn fit_requires_three_usable_root_points() {
        let (robot, _) = toy_hand();
        let mut per_link: Vec<Vec<Point3<f64>>> =
            robot.links.iter().map(|_| vec![Point3::origin(); 4]).collect();
        per_link[robot.root] = vec![Point3::origin(), Point3::new(0.01, 0.0, 0.0)];
        let pts = LinkPointSet::new(per_link);
        let target = cloud(vec![Point3::origin(); pts.total()]);
        let err =
            fit_configuration(&robot, &pts, &target, &robot.rest_config()).unwrap_err();
        assert!(err.to_string().contains("at least 3"), "{err}");
    }

    #[test]
    fn decode_round_trip_recovers_grasp() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(9);
        let truth = random_config(&robot, &mut rng);
        let posed = point_cloud_fk(&robot, &truth, &pts).unwrap();
        let object = sphere_cloud(96, 0.05, 21);
        let d = encode_distance_matrix(&posed, &object).unwrap();

        let record = decode_grasp(&d, &object, &robot, &pts, None).unwrap();
        assert_eq!(record.provenance, Provenance::Decoded);
        assert_eq!(record.infeasible_points, Some(0));
        assert!(record.fit_rms.unwrap() < 1e-6, "rms {:?}", record.fit_rms);
        let q = record.joint_config().unwrap();
        for (a, t) in q.angles.iter().zip(&truth.angles) {
            assert!((a - t).abs() < 1e-3, "{a} vs {t}");
        }
        assert!(q.base.rotation.angle_to(&truth.base.rotation) < 1e-3);
        assert!(
            (q.base.translation.vector - truth.base.translation.vector).norm() < 1e-4
        );
    }

    #[test]
    fn decode_translated_grasp_translates_base() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(10);
        let truth = random_config(&robot, &mut rng);
        let shift = Vector3::new(0.05, -0.03, 0.08);
        let mut moved = truth.clone();
        moved.base.translation.vector += shift;

        let object = sphere_cloud(96, 0.05, 22);
        let d = encode_distance_matrix(
            &point_cloud_fk(&robot, &truth, &pts).unwrap(),
            &object,
        )
        .unwrap();
        let d_moved = encode_distance_matrix(
            &point_cloud_fk(&robot, &moved, &pts).unwrap(),
            &object,
        )
        .unwrap();

        let qa = decode_grasp(&d, &object, &robot, &pts, None)
            .unwrap()
            .joint_config()
            .unwrap();
        let qb = decode_grasp(&d_moved, &object, &robot, &pts, None)
            .unwrap()
            .joint_config()
            .unwrap();
        assert!(
            ((qb.base.translation.vector - qa.base.translation.vector) - shift).norm() < 1e-4
        );
    }

    #[test]
    fn decode_noisy_matrix_reports_fit_error_without_failing() {
        let (robot, pts) = toy_hand();
        let mut rng = seeded_rng(11);
        let truth = random_config(&robot, &mut rng);
        let posed = point_cloud_fk(&robot, &truth, &pts).unwrap();
        let object = sphere_cloud(96, 0.05, 23);
        let mut d = encode_distance_matrix(&posed, &object).unwrap();
        for v in d.data.iter_mut() {
            *v = (*v * (1.0 + rng.gen_range(-0.05..0.05))).max(0.0);
        }
        let record = decode_grasp(&d, &object, &robot, &pts, None).unwrap();
        let rms = record.fit_rms.unwrap();
        assert!(rms.is_finite() && rms > 0.0, "rms {rms} reported");
        let q = record.joint_config().unwrap();
        for (a, &(lo, hi)) in q.angles.iter().zip(&robot.limits()) {
            assert!(*a >= lo && *a <= hi, "limits respected under noise");
        }
    }
}

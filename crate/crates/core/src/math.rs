//! Small shared math and hashing utilities.

use nalgebra::{Isometry3, Matrix3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The crate-wide seeded pseudo-random generator.
///
/// ChaCha8 is used everywhere a seed appears so that identical seeds yield
/// bit-identical streams on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a stream index.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&stream.to_le_bytes());
    bytes[16..24].copy_from_slice(&fnv1a64(&seed.to_le_bytes()).to_le_bytes());
    bytes[24..32].copy_from_slice(&fnv1a64(&stream.to_le_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// FNV-1a 64-bit content hash. Stable across platforms and releases, which
/// is all the dataset identity checks need.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hash a point list by its little-endian f64 coordinates, in order.
pub fn hash_points(points: &[Point3<f64>]) -> u64 {
    let mut bytes = Vec::with_capacity(points.len() * 24);
    for p in points {
        for c in p.coords.iter() {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
    }
    fnv1a64(&bytes)
}

/// A rigid transform serialized as translation + unit quaternion `[w,x,y,z]`.
///
/// This is the JSON wire form for every pose in the dataset formats; in
/// memory the crate works with [`Isometry3<f64>`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Translation in meters.
    pub t: [f64; 3],
    /// Unit quaternion, `[w, x, y, z]`.
    pub q: [f64; 4],
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            t: [0.0; 3],
            q: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let q = iso.rotation.quaternion();
        Pose {
            t: [iso.translation.x, iso.translation.y, iso.translation.z],
            q: [q.w, q.i, q.j, q.k],
        }
    }

    /// Convert to an isometry, validating the quaternion norm to 1e-9.
    pub fn to_isometry(&self) -> crate::Result<Isometry3<f64>> {
        let q = Quaternion::new(self.q[0], self.q[1], self.q[2], self.q[3]);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(crate::Error::Invalid(format!(
                "quaternion norm {} deviates from 1 by more than 1e-9",
                q.norm()
            )));
        }
        Ok(Isometry3::from_parts(
            Translation3::new(self.t[0], self.t[1], self.t[2]),
            UnitQuaternion::new_normalize(q),
        ))
    }
}

/// Exponential map from a rotation vector to a unit quaternion.
pub fn quat_exp(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

/// Rotation angle between two unit quaternions, radians.
pub fn quat_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.angle_to(b)
}

/// Axis-aligned bounding box of a point set. Returns `None` for empty input.
pub fn bounding_box(points: &[Point3<f64>]) -> Option<(Point3<f64>, Point3<f64>)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    Some((lo, hi))
}

/// Diagonal length of the axis-aligned bounding box, 0 for empty input.
pub fn bbox_diagonal(points: &[Point3<f64>]) -> f64 {
    bounding_box(points).map_or(0.0, |(lo, hi)| (hi - lo).norm())
}

/// Weighted rigid alignment (Kabsch): the isometry `T` minimizing
/// `Σ wᵢ·‖T·aᵢ − bᵢ‖²` over proper rotations plus translation.
///
/// Reflections are excluded by the usual determinant sign fix. For
/// degenerate sets (collinear or coincident points) the minimizer is not
/// unique and some valid choice is returned. `weights` defaults to
/// uniform; total weight must be positive.
pub fn kabsch(
    a: &[Point3<f64>],
    b: &[Point3<f64>],
    weights: Option<&[f64]>,
) -> crate::Result<Isometry3<f64>> {
    if a.len() != b.len() {
        return Err(crate::Error::dim(a.len(), b.len(), "kabsch point sets"));
    }
    if let Some(w) = weights {
        if w.len() != a.len() {
            return Err(crate::Error::dim(a.len(), w.len(), "kabsch weights"));
        }
    }
    if a.len() < 3 {
        return Err(crate::Error::Invalid(format!(
            "rigid alignment needs at least 3 points, got {}",
            a.len()
        )));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..a.len()).map(weight).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(crate::Error::Invalid(format!(
            "total alignment weight must be positive, got {total}"
        )));
    }

    let mut mu_a = Vector3::zeros();
    let mut mu_b = Vector3::zeros();
    for i in 0..a.len() {
        mu_a += weight(i) * a[i].coords;
        mu_b += weight(i) * b[i].coords;
    }
    mu_a /= total;
    mu_b /= total;

    // Cross-covariance C = Σ w·(b−μb)(a−μa)ᵀ; the optimal rotation is the
    // orthogonal polar factor of C with det +1.
    let mut c = Matrix3::zeros();
    for i in 0..a.len() {
        c += weight(i) * (b[i].coords - mu_b) * (a[i].coords - mu_a).transpose();
    }
    let svd = c.svd(true, true);
    let u = svd.u.expect("svd of 3x3 requested u");
    let v_t = svd.v_t.expect("svd of 3x3 requested v_t");
    let sign = (u.determinant() * v_t.determinant()).signum();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * v_t;
    let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    Ok(Isometry3::from_parts(
        Translation3::from(mu_b - r * mu_a),
        rot,
    ))
}

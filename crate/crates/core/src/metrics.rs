//! Grasp-quality metrics: penetration depth and volume, disjoint distance,
//! and contact-region ratio, plus the per-grasp report that aggregates them.
//!
//! Units: inputs are meters (like the rest of the crate); reported values are
//! centimeters / cubic centimeters, matching how grasp datasets tabulate
//! these quantities. Every report records the thresholds it was computed
//! with so filtered datasets stay auditable.

use serde::{Deserialize, Serialize};

use crate::geometry::{sample_surface, KdTree3, PointCloud, TriMesh};
use crate::kinematics::{forward_kinematics, point_cloud_fk, LinkPointSet, RobotModel};
use crate::pipeline::GraspRecord;
use crate::{Error, Result};

/// Hard cap on voxel-grid cells so a typo'd voxel size fails loudly instead
/// of exhausting memory.
const MAX_VOXEL_CELLS: f64 = 4.0e8;

/// Fixed fractional offsets (in voxel units) of the y/z column lattice.
/// Axis-aligned meshes routinely place triangle edges on rational lines like
/// `y = z`; distinct irrational-ish offsets keep columns off those edges so
/// the even-odd crossing count stays trustworthy. The offsets are constants,
/// so the grid stays anchored to the intersection box and results stay
/// deterministic and translation-invariant.
const COLUMN_JITTER_Y: f64 = 0.2137919443;
const COLUMN_JITTER_Z: f64 = 0.4283180035;

/// Thresholds for [`quality_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Contact threshold in centimeters: an object sample counts as "in
    /// contact" when its nearest hand point is within this distance.
    pub contact_threshold_cm: f64,
    /// Voxel edge length in centimeters for penetration volume.
    pub voxel_cm: f64,
    /// Number of object-surface samples used for the contact ratio.
    pub object_samples: usize,
    /// Seed for the object-surface sampling.
    pub sample_seed: u64,
    /// Links whose points count as "fingers" for the disjoint distance.
    /// `None` means every non-root link.
    pub finger_links: Option<Vec<String>>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            contact_threshold_cm: 0.5,
            voxel_cm: 0.2,
            object_samples: 2048,
            sample_seed: 0,
            finger_links: None,
        }
    }
}

/// The four grasp-quality metrics plus the thresholds they were computed
/// with. All fields are nonnegative and `contact_ratio` is in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    /// Max penetration of any hand point into the object, cm.
    pub penetration_depth_cm: f64,
    /// Overlap volume between hand links and object, cm³.
    pub penetration_volume_cm3: f64,
    /// Mean outside-distance from finger points to the object surface, cm.
    pub disjoint_mean_cm: f64,
    /// Fraction of object surface samples within the contact threshold of a
    /// hand point.
    pub contact_ratio: f64,
    /// Contact threshold the ratio was computed with, cm.
    pub contact_threshold_cm: f64,
    /// Voxel size the volume was computed with, cm.
    pub voxel_cm: f64,
}

impl QualityMetrics {
    /// Check the field invariants (nonnegative, ratio ≤ 1).
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("penetration_depth_cm", self.penetration_depth_cm),
            ("penetration_volume_cm3", self.penetration_volume_cm3),
            ("disjoint_mean_cm", self.disjoint_mean_cm),
            ("contact_ratio", self.contact_ratio),
            ("contact_threshold_cm", self.contact_threshold_cm),
            ("voxel_cm", self.voxel_cm),
        ];
        for (name, value) in nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Invalid(format!(
                    "metric field {name} = {value} must be finite and >= 0"
                )));
            }
        }
        if self.contact_ratio > 1.0 {
            return Err(Error::Invalid(format!(
                "contact_ratio {} exceeds 1",
                self.contact_ratio
            )));
        }
        Ok(())
    }
}

/// Max over hand points of `max(0, -signed_distance)`, in centimeters.
///
/// Zero when no point is inside the object. Errors when the object mesh is
/// not watertight (the sign of the distance would be meaningless).
pub fn penetration_depth(hand_cloud: &PointCloud, object: &TriMesh) -> Result<f64> {
    if !object.is_watertight() {
        return Err(Error::NotWatertight(
            "penetration depth needs a watertight object mesh".into(),
        ));
    }
    let mut depth = 0.0f64;
    for p in &hand_cloud.points {
        depth = depth.max(-object.signed_distance(p));
    }
    Ok(depth.max(0.0) * 100.0)
}

/// Overlap volume between the union of `hand_links` and `object`, in cm³,
/// from counting voxel centers that are inside the object and inside at
/// least one hand link.
///
/// The grid is axis-aligned in the frame the meshes are expressed in and is
/// anchored at the low corner of the intersection of the two sides' bounding
/// boxes, so the result is exactly invariant under common translations and
/// invariant under common rotations when the caller poses both sides in a
/// covariant frame (as [`quality_report`] does, working in the object's
/// local frame).
pub fn penetration_volume(hand_links: &[TriMesh], object: &TriMesh, voxel_cm: f64) -> Result<f64> {
    if !(voxel_cm > 0.0) {
        return Err(Error::Invalid(format!(
            "voxel size must be positive, got {voxel_cm} cm"
        )));
    }
    if !object.is_watertight() {
        return Err(Error::NotWatertight(
            "penetration volume needs a watertight object mesh".into(),
        ));
    }
    for (i, link) in hand_links.iter().enumerate() {
        if !link.is_watertight() {
            return Err(Error::NotWatertight(format!(
                "penetration volume needs watertight hand meshes (link mesh {i} is open)"
            )));
        }
    }

    let voxel = voxel_cm / 100.0;
    let (obj_lo, obj_hi) = object.aabb();
    let mut hand_lo = [f64::INFINITY; 3];
    let mut hand_hi = [f64::NEG_INFINITY; 3];
    for link in hand_links {
        let (lo, hi) = link.aabb();
        for k in 0..3 {
            hand_lo[k] = hand_lo[k].min(lo[k]);
            hand_hi[k] = hand_hi[k].max(hi[k]);
        }
    }
    let lo = [
        obj_lo.x.max(hand_lo[0]),
        obj_lo.y.max(hand_lo[1]),
        obj_lo.z.max(hand_lo[2]),
    ];
    let hi = [
        obj_hi.x.min(hand_hi[0]),
        obj_hi.y.min(hand_hi[1]),
        obj_hi.z.min(hand_hi[2]),
    ];
    if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
        return Ok(0.0);
    }

    let counts: Vec<usize> = (0..3).map(|k| ((hi[k] - lo[k]) / voxel).ceil() as usize).collect();
    let (nx, ny, nz) = (counts[0].max(1), counts[1].max(1), counts[2].max(1));
    if (nx as f64) * (ny as f64) * (nz as f64) > MAX_VOXEL_CELLS {
        return Err(Error::Invalid(format!(
            "voxel size {voxel_cm} cm yields {nx}×{ny}×{nz} cells; refusing grids above {MAX_VOXEL_CELLS:.0}"
        )));
    }

    let mut inside = 0u64;
    let mut obj_mask = vec![false; nx];
    let mut hand_mask = vec![false; nx];
    let mut xs = Vec::new();
    for iy in 0..ny {
        let y = lo[1] + (iy as f64 + 0.5 + COLUMN_JITTER_Y) * voxel;
        for iz in 0..nz {
            let z = lo[2] + (iz as f64 + 0.5 + COLUMN_JITTER_Z) * voxel;
            fill_column(object, y, z, lo[0], voxel, &mut obj_mask, &mut xs);
            if obj_mask.iter().all(|m| !m) {
                continue;
            }
            hand_mask.iter_mut().for_each(|m| *m = false);
            let mut link_mask = vec![false; nx];
            for link in hand_links {
                fill_column(link, y, z, lo[0], voxel, &mut link_mask, &mut xs);
                for (h, l) in hand_mask.iter_mut().zip(&link_mask) {
                    *h |= *l;
                }
            }
            inside += obj_mask
                .iter()
                .zip(&hand_mask)
                .filter(|(o, h)| **o && **h)
                .count() as u64;
        }
    }
    Ok(inside as f64 * voxel * voxel * voxel * 1.0e6)
}

/// Mark the voxel centers of one x-column that are inside `mesh`.
///
/// Uses even–odd parity of the mesh's x-crossings along the column; on the
/// measure-zero degenerate columns where the crossing count is odd (the line
/// grazes an edge or vertex) it falls back to classifying each center by
/// winding number.
fn fill_column(
    mesh: &TriMesh,
    y: f64,
    z: f64,
    x0: f64,
    voxel: f64,
    mask: &mut [bool],
    xs: &mut Vec<f64>,
) {
    mask.iter_mut().for_each(|m| *m = false);
    mesh.x_crossings(y, z, xs);
    let center = |i: usize| x0 + (i as f64 + 0.5) * voxel;
    if xs.len() % 2 == 0 {
        for pair in xs.chunks_exact(2) {
            // Centers with pair[0] <= center < pair[1].
            let first = ((pair[0] - x0) / voxel - 0.5).ceil().max(0.0) as usize;
            for (i, m) in mask.iter_mut().enumerate().skip(first) {
                let c = center(i);
                if c >= pair[1] {
                    break;
                }
                if c >= pair[0] {
                    *m = true;
                }
            }
        }
    } else {
        for (i, m) in mask.iter_mut().enumerate() {
            let p = nalgebra::Point3::new(center(i), y, z);
            *m = mesh.winding_number(&p) > 0.5;
        }
    }
}

/// Mean over finger points of `max(0, signed_distance)` to the object, in
/// centimeters: the average distance by which fingers hover off the surface.
/// Penetrating points contribute zero. Errors on an empty finger cloud.
pub fn disjoint_distance(finger_cloud: &PointCloud, object: &TriMesh) -> Result<f64> {
    if finger_cloud.points.is_empty() {
        return Err(Error::Invalid(
            "disjoint distance needs a nonempty finger cloud".into(),
        ));
    }
    let sum: f64 = finger_cloud
        .points
        .iter()
        .map(|p| object.signed_distance(p).max(0.0))
        .sum();
    Ok(sum / finger_cloud.points.len() as f64 * 100.0)
}

/// Fraction of object sample points whose nearest hand point lies within
/// `threshold_cm`. Errors on empty object samples, an empty hand cloud, or a
/// non-positive threshold.
pub fn contact_ratio(
    object_samples: &PointCloud,
    hand_cloud: &PointCloud,
    threshold_cm: f64,
) -> Result<f64> {
    if !(threshold_cm > 0.0) {
        return Err(Error::Invalid(format!(
            "contact threshold must be positive, got {threshold_cm} cm"
        )));
    }
    if object_samples.points.is_empty() {
        return Err(Error::Invalid(
            "contact ratio needs nonempty object samples".into(),
        ));
    }
    if hand_cloud.points.is_empty() {
        return Err(Error::Invalid("contact ratio needs a nonempty hand cloud".into()));
    }
    let tree = KdTree3::build(&hand_cloud.points);
    let thr2 = (threshold_cm / 100.0) * (threshold_cm / 100.0);
    let hits = object_samples
        .points
        .iter()
        .filter(|p| tree.nearest(p).map(|(_, d2)| d2 <= thr2).unwrap_or(false))
        .count();
    Ok(hits as f64 / object_samples.points.len() as f64)
}

/// Pose the hand with the record's configuration and compute all four
/// metrics against the object.
///
/// Works in the object's local frame (the hand base is premultiplied by the
/// inverse object pose), which makes every metric invariant under a common
/// rigid transform of the grasp. Link meshes are loaded from the robot
/// description for the volume term; `object` is the unposed reference mesh
/// for `grasp.object_mesh`.
pub fn quality_report(
    grasp: &GraspRecord,
    robot: &RobotModel,
    pts: &LinkPointSet,
    object: &TriMesh,
    cfg: &MetricsConfig,
) -> Result<QualityMetrics> {
    grasp.validate_for(robot)?;
    let object_pose = grasp.object_pose.to_isometry()?;
    let mut q = grasp.joint_config()?;
    q.base = object_pose.inverse() * q.base;

    let hand_cloud = point_cloud_fk(robot, &q, pts)?;
    let link_poses = forward_kinematics(robot, &q)?;

    let mut hand_meshes = Vec::new();
    for (link, pose) in robot.links.iter().zip(&link_poses) {
        match &link.mesh {
            Some(path) => hand_meshes.push(TriMesh::load_obj(path)?.transformed(pose)),
            None => {
                return Err(Error::Robot(format!(
                    "link {} has no mesh; penetration volume needs one per link",
                    link.name
                )))
            }
        }
    }

    let depth = penetration_depth(&hand_cloud, object)?;
    let volume = penetration_volume(&hand_meshes, object, cfg.voxel_cm)?;

    let fingers = finger_cloud(&hand_cloud, robot, cfg.finger_links.as_deref())?;
    let disjoint = disjoint_distance(&fingers, object)?;

    let samples = sample_surface(object, cfg.object_samples, cfg.sample_seed)?;
    let ratio = contact_ratio(&samples, &hand_cloud, cfg.contact_threshold_cm)?;

    let report = QualityMetrics {
        penetration_depth_cm: depth,
        penetration_volume_cm3: volume,
        disjoint_mean_cm: disjoint,
        contact_ratio: ratio,
        contact_threshold_cm: cfg.contact_threshold_cm,
        voxel_cm: cfg.voxel_cm,
    };
    report.validate()?;
    Ok(report)
}

/// Select the hand points whose segment label belongs to a finger link.
/// `names = None` selects every non-root link.
fn finger_cloud(
    hand_cloud: &PointCloud,
    robot: &RobotModel,
    names: Option<&[String]>,
) -> Result<PointCloud> {
    let mut is_finger = vec![false; robot.links.len()];
    match names {
        None => {
            for (i, flag) in is_finger.iter_mut().enumerate() {
                *flag = i != robot.root;
            }
        }
        Some(names) => {
            for name in names {
                let idx = robot.link_index(name).ok_or_else(|| {
                    Error::Robot(format!("finger link '{name}' not in robot description"))
                })?;
                is_finger[idx] = true;
            }
        }
    }
    let segments = hand_cloud.segments.as_ref().ok_or_else(|| {
        Error::Internal("hand cloud from point_cloud_fk is missing segment labels".into())
    })?;
    let points: Vec<_> = hand_cloud
        .points
        .iter()
        .zip(segments)
        .filter(|(_, s)| is_finger[**s as usize])
        .map(|(p, _)| *p)
        .collect();
    PointCloud::new(points)
}

//! Forward kinematics and the point-cloud FK map.
//!
//! Link poses follow the usual tree sweep: the root link carries the base
//! pose, and every child frame is `parent ∘ joint origin ∘ motion(angle)`.
//! `point_cloud_fk` then pushes each link's stored local surface samples
//! through its pose, producing the ordered robot cloud the distance-matrix
//! codec indexes into.

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{sample_surface_with, PointCloud, TriMesh};
use crate::kinematics::model::{JointConfig, JointType, LinkPointSet, RobotModel};
use crate::math::derived_rng;

/// Pose of every link (indexed like `model.links`) under `q`.
pub fn forward_kinematics(model: &RobotModel, q: &JointConfig) -> Result<Vec<Isometry3<f64>>> {
    q.check_dims(model)?;
    let mut poses = vec![Isometry3::identity(); model.links.len()];
    poses[model.root] = q.base;
    for &ji in model.traversal() {
        let joint = &model.joints[ji];
        let motion = match joint.joint_type {
            JointType::Fixed => Isometry3::identity(),
            JointType::Revolute => {
                let angle = q.angles[model.angle_index(ji).expect("revolute joint is actuated")];
                let axis = Unit::new_unchecked(joint.axis);
                Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_axis_angle(&axis, angle),
                )
            }
            JointType::Prismatic => {
                let d = q.angles[model.angle_index(ji).expect("prismatic joint is actuated")];
                Isometry3::from_parts(
                    Translation3::from(joint.axis * d),
                    UnitQuaternion::identity(),
                )
            }
        };
        poses[joint.child] = poses[joint.parent] * joint.origin * motion;
    }
    Ok(poses)
}

/// The paper's `FK(q, {P_ℓi})`: every link-local sample pushed through its
/// link pose, concatenated in stable global order, segment-labelled by
/// link index.
pub fn point_cloud_fk(model: &RobotModel, q: &JointConfig, pts: &LinkPointSet) -> Result<PointCloud> {
    if pts.link_count() != model.links.len() {
        return Err(Error::dim(model.links.len(), pts.link_count(), "link point sets"));
    }
    let poses = forward_kinematics(model, q)?;
    let mut points = Vec::with_capacity(pts.total());
    let mut segments = Vec::with_capacity(pts.total());
    for (link, pose) in poses.iter().enumerate() {
        for p in pts.link_points(link) {
            points.push(pose * p);
            segments.push(link as u32);
        }
    }
    PointCloud::with_segments(points, Some(segments))
}

/// World positions of the model's keypoints under `q`, in keypoint order.
pub fn keypoint_fk(model: &RobotModel, q: &JointConfig) -> Result<Vec<Point3<f64>>> {
    let poses = forward_kinematics(model, q)?;
    Ok(model
        .keypoints
        .iter()
        .map(|kp| poses[kp.link] * Point3::from(kp.offset))
        .collect())
}

/// Clamps each angle into its joint's `[lo, hi]`; the base is untouched.
/// Idempotent.
pub fn clamp_to_limits(model: &RobotModel, q: &JointConfig) -> Result<JointConfig> {
    q.check_dims(model)?;
    let limits = model.limits();
    let angles = q
        .angles
        .iter()
        .zip(&limits)
        .map(|(&a, &(lo, hi))| a.clamp(lo, hi))
        .collect();
    Ok(JointConfig {
        base: q.base,
        angles,
    })
}

/// Samples `counts[l]` surface points from each link's collision mesh (in
/// link-local coordinates). Deterministic: each link draws from its own
/// stream derived from `seed` and the link index, so one link's count does
/// not perturb another link's points.
pub fn sample_link_points(model: &RobotModel, counts: &[usize], seed: u64) -> Result<LinkPointSet> {
    if counts.len() != model.links.len() {
        return Err(Error::dim(model.links.len(), counts.len(), "per-link counts"));
    }
    let mut per_link = Vec::with_capacity(counts.len());
    for (link, &count) in model.links.iter().zip(counts) {
        if count == 0 {
            per_link.push(Vec::new());
            continue;
        }
        let path = link.mesh.as_ref().ok_or_else(|| {
            Error::Robot(format!("link {:?} has no collision mesh to sample", link.name))
        })?;
        let mesh = TriMesh::load_obj(path)?;
        let mut rng = derived_rng(seed, per_link.len() as u64);
        let cloud = sample_surface_with(&mesh, count, &mut rng)?;
        per_link.push(cloud.points);
    }
    Ok(LinkPointSet::new(per_link))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::model::{Joint, Keypoint, Link};
    use crate::shapes;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn link(name: &str) -> Link {
        Link {
            name: name.into(),
            mesh: None,
            parent_joint: None,
        }
    }

    /// Planar 2-R arm: base → (joint z at x=0) upper (length 0.3) →
    /// (joint z at x=0.3) lower; tip keypoint at (0.25, 0, 0) on lower.
    fn planar_arm() -> RobotModel {
        RobotModel::new(
            "planar".into(),
            vec![link("base"), link("upper"), link("lower")],
            vec![
                Joint {
                    name: "shoulder".into(),
                    joint_type: JointType::Revolute,
                    parent: 0,
                    child: 1,
                    origin: Isometry3::identity(),
                    axis: Vector3::z(),
                    limits: (-3.0, 3.0),
                },
                Joint {
                    name: "elbow".into(),
                    joint_type: JointType::Revolute,
                    parent: 1,
                    child: 2,
                    origin: Isometry3::translation(0.3, 0.0, 0.0),
                    axis: Vector3::z(),
                    limits: (-3.0, 3.0),
                },
            ],
            vec![Keypoint {
                link: 2,
                offset: Vector3::new(0.25, 0.0, 0.0),
                label: "tip".into(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn rest_pose_composes_origins() {
        let model = planar_arm();
        let q = model.rest_config();
        let poses = forward_kinematics(&model, &q).unwrap();
        assert_relative_eq!(poses[1].translation.vector.norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(poses[2].translation.x, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let model = planar_arm();
        let q = JointConfig::new(Isometry3::identity(), vec![FRAC_PI_2, 0.0]);
        let poses = forward_kinematics(&model, &q).unwrap();
        let p = poses[1] * Point3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_joint_chain_matches_planar_oracle() {
        // Closed-form planar arm: tip at
        //   (l1 cos θ1 + l2 cos(θ1+θ2), l1 sin θ1 + l2 sin(θ1+θ2)).
        let model = planar_arm();
        let (t1, t2) = (FRAC_PI_4, FRAC_PI_4);
        let q = JointConfig::new(Isometry3::identity(), vec![t1, t2]);
        let tip = keypoint_fk(&model, &q).unwrap()[0];
        let (l1, l2) = (0.3, 0.25);
        assert_relative_eq!(tip.x, l1 * t1.cos() + l2 * (t1 + t2).cos(), epsilon = 1e-12);
        assert_relative_eq!(tip.y, l1 * t1.sin() + l2 * (t1 + t2).sin(), epsilon = 1e-12);
        assert_relative_eq!(tip.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn child_equals_parent_compose_local() {
        let model = planar_arm();
        let q = JointConfig::new(
            Isometry3::new(Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.2, 0.1, -0.4)),
            vec![0.3, -0.7],
        );
        let poses = forward_kinematics(&model, &q).unwrap();
        for &ji in model.traversal() {
            let j = &model.joints[ji];
            let angle = model.angle_index(ji).map(|ai| q.angles[ai]).unwrap_or(0.0);
            let motion = UnitQuaternion::from_axis_angle(&Unit::new_normalize(j.axis), angle);
            let local = j.origin * Isometry3::from_parts(Translation3::identity(), motion);
            let expect = poses[j.parent] * local;
            let err = (poses[j.child].translation.vector - expect.translation.vector).norm();
            assert!(err < 1e-12);
            assert!(poses[j.child].rotation.rotation_to(&expect.rotation).angle() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = planar_arm();
        let q = JointConfig::new(Isometry3::identity(), vec![0.0]);
        assert!(forward_kinematics(&model, &q).is_err());
    }

    #[test]
    fn clamp_is_elementwise_and_idempotent() {
        let model = planar_arm();
        let q = JointConfig::new(Isometry3::identity(), vec![-3.5, 4.2]);
        let c = clamp_to_limits(&model, &q).unwrap();
        assert_eq!(c.angles, vec![-3.0, 3.0]);
        let c2 = clamp_to_limits(&model, &c).unwrap();
        assert_eq!(c.angles, c2.angles);
        // In-range untouched.
        let q = JointConfig::new(Isometry3::identity(), vec![0.5, -0.5]);
        assert_eq!(clamp_to_limits(&model, &q).unwrap().angles, q.angles);
    }

    fn cube_point_set(model: &RobotModel, counts: &[usize], seed: u64) -> LinkPointSet {
        // Synthesize local points without meshes: seeded cube samples.
        let cube = shapes::unit_cube();
        let mut per_link = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                per_link.push(Vec::new());
            } else {
                let mut rng = derived_rng(seed, i as u64);
                per_link.push(sample_surface_with(&cube, c, &mut rng).unwrap().points);
            }
        }
        assert_eq!(per_link.len(), model.links.len());
        LinkPointSet::new(per_link)
    }

    #[test]
    fn point_cloud_fk_matches_manual_transform() {
        let model = planar_arm();
        let pts = cube_point_set(&model, &[5, 7, 3], 2);
        let q = JointConfig::new(
            Isometry3::new(Vector3::new(0.3, 0.1, -0.2), Vector3::new(-0.3, 0.5, 0.9)),
            vec![0.4, -1.1],
        );
        let cloud = point_cloud_fk(&model, &q, &pts).unwrap();
        assert_eq!(cloud.len(), 15);
        let poses = forward_kinematics(&model, &q).unwrap();
        let mut k = 0;
        for link in 0..3 {
            for p in pts.link_points(link) {
                let expect = poses[link] * p;
                assert!((cloud.points[k] - expect).norm() < 1e-12);
                assert_eq!(cloud.segments.as_ref().unwrap()[k], link as u32);
                k += 1;
            }
        }
    }

    #[test]
    fn base_translation_shifts_every_point() {
        let model = planar_arm();
        let pts = cube_point_set(&model, &[4, 4, 4], 9);
        let q0 = JointConfig::new(Isometry3::identity(), vec![0.7, -0.2]);
        let t = Vector3::new(0.11, -0.22, 0.33);
        let q1 = JointConfig::new(Isometry3::translation(t.x, t.y, t.z), q0.angles.clone());
        let c0 = point_cloud_fk(&model, &q0, &pts).unwrap();
        let c1 = point_cloud_fk(&model, &q1, &pts).unwrap();
        for (a, b) in c0.points.iter().zip(&c1.points) {
            assert!(((b - a) - t).norm() < 1e-12);
        }
    }

    #[test]
    fn rigid_body_preserves_intra_link_distances() {
        let model = planar_arm();
        let pts = cube_point_set(&model, &[0, 12, 0], 4);
        let rest = point_cloud_fk(&model, &model.rest_config(), &pts).unwrap();
        let q = JointConfig::new(
            Isometry3::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.4, -0.8, 1.2)),
            vec![1.3, -2.1],
        );
        let posed = point_cloud_fk(&model, &q, &pts).unwrap();
        for i in 0..rest.len() {
            for j in (i + 1)..rest.len() {
                let d0 = (rest.points[i] - rest.points[j]).norm();
                let d1 = (posed.points[i] - posed.points[j]).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn keypoint_on_root_with_zero_offset_is_base_translation() {
        let mut model = planar_arm();
        model.keypoints.push(Keypoint {
            link: 0,
            offset: Vector3::zeros(),
            label: "root".into(),
        });
        let base = Isometry3::translation(0.5, -0.1, 0.7);
        let q = JointConfig::new(base, vec![0.0, 0.0]);
        let kps = keypoint_fk(&model, &q).unwrap();
        assert!((kps[1].coords - base.translation.vector).norm() < 1e-15);
    }
}

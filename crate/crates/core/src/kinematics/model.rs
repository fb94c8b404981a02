//! Robot model types: the validated kinematic tree, joint configurations,
//! and per-link point sets with stable global indexing.

use std::collections::HashSet;
use std::path::PathBuf;

use nalgebra::{Isometry3, Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
    Fixed,
}

/// A joint connecting `parent` to `child` (link indices). The child link
/// frame is `parent ∘ origin ∘ motion(angle)`, where motion is a rotation
/// about `axis` (revolute, radians) or a translation along `axis`
/// (prismatic, meters). Fixed joints have no motion, axis, or limits.
#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub joint_type: JointType,
    pub parent: usize,
    pub child: usize,
    pub origin: Isometry3<f64>,
    /// Unit vector in the pre-motion joint frame; zero for fixed joints.
    pub axis: Vector3<f64>,
    /// `[lo, hi]` in radians or meters; `(0, 0)` for fixed joints.
    pub limits: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    /// Collision mesh path, resolved against the description's directory.
    pub mesh: Option<PathBuf>,
    /// Index into `RobotModel::joints` of the joint whose child this link
    /// is; `None` only for the root.
    pub parent_joint: Option<usize>,
}

/// Named retargeting anchor: a fixed offset in a link's local frame.
#[derive(Debug, Clone)]
pub struct Keypoint {
    pub link: usize,
    pub offset: Vector3<f64>,
    pub label: String,
}

/// Validated kinematic tree. Immutable after construction; FK and sampling
/// only read from it, so it is safe to share across threads.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub keypoints: Vec<Keypoint>,
    pub root: usize,
    /// Joint indices ordered so each parent link precedes its children.
    traversal: Vec<usize>,
    /// Joint indices of non-fixed joints, in `joints` order; defines the
    /// meaning of `JointConfig::angles`.
    actuated: Vec<usize>,
}

impl RobotModel {
    /// Validates the tree structure and joint geometry:
    /// single root, no cycles, valid link references, unit axes
    /// (within 1e-9), ordered limits, keypoints on existing links.
    pub fn new(
        name: String,
        links: Vec<Link>,
        joints: Vec<Joint>,
        keypoints: Vec<Keypoint>,
    ) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Robot("robot has no links".into()));
        }
        let mut names = HashSet::new();
        for l in &links {
            if !names.insert(l.name.as_str()) {
                return Err(Error::Robot(format!("duplicate link name {:?}", l.name)));
            }
        }
        let mut jnames = HashSet::new();
        for j in &joints {
            if !jnames.insert(j.name.as_str()) {
                return Err(Error::Robot(format!("duplicate joint name {:?}", j.name)));
            }
        }

        let n = links.len();
        let mut parent_joint: Vec<Option<usize>> = vec![None; n];
        for (ji, j) in joints.iter().enumerate() {
            if j.parent >= n || j.child >= n {
                return Err(Error::Robot(format!(
                    "joint {:?} references a missing link",
                    j.name
                )));
            }
            if j.child == j.parent {
                return Err(Error::Robot(format!(
                    "joint {:?} connects link {:?} to itself",
                    j.name, links[j.child].name
                )));
            }
            if parent_joint[j.child].is_some() {
                return Err(Error::Robot(format!(
                    "link {:?} has two parent joints",
                    links[j.child].name
                )));
            }
            parent_joint[j.child] = Some(ji);
            match j.joint_type {
                JointType::Fixed => {}
                JointType::Revolute | JointType::Prismatic => {
                    if (j.axis.norm() - 1.0).abs() > 1e-9 {
                        return Err(Error::Robot(format!(
                            "joint {:?} axis has norm {}, expected 1",
                            j.name,
                            j.axis.norm()
                        )));
                    }
                    if j.limits.0 > j.limits.1 {
                        return Err(Error::Robot(format!(
                            "joint {:?} limits are reversed",
                            j.name
                        )));
                    }
                }
            }
        }

        let roots: Vec<usize> = (0..n).filter(|&i| parent_joint[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::Robot("joint graph has a cycle (no root link)".into())),
            _ => {
                return Err(Error::Robot(format!(
                    "joint graph has {} roots ({:?}, {:?}, ...)",
                    roots.len(),
                    links[roots[0]].name,
                    links[roots[1]].name
                )))
            }
        };

        // BFS from the root; links not reached sit on a cycle (or are
        // disconnected, which the single-root check above already rules
        // out for acyclic graphs).
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (ji, j) in joints.iter().enumerate() {
            children[j.parent].push(ji);
        }
        let mut traversal = Vec::with_capacity(joints.len());
        let mut visited = vec![false; n];
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let c = joints[ji].child;
                if visited[c] {
                    return Err(Error::Robot(format!(
                        "joint graph has a cycle through link {:?}",
                        links[c].name
                    )));
                }
                visited[c] = true;
                traversal.push(ji);
                queue.push_back(c);
            }
        }
        if let Some(unreached) = (0..n).find(|&i| !visited[i]) {
            return Err(Error::Robot(format!(
                "link {:?} is part of a joint cycle",
                links[unreached].name
            )));
        }

        for kp in &keypoints {
            if kp.link >= n {
                return Err(Error::Robot(format!(
                    "keypoint {:?} references a missing link",
                    kp.label
                )));
            }
        }

        let mut links = links;
        for (li, pj) in parent_joint.iter().enumerate() {
            links[li].parent_joint = *pj;
        }

        let actuated = (0..joints.len())
            .filter(|&ji| joints[ji].joint_type != JointType::Fixed)
            .collect();

        Ok(RobotModel {
            name,
            links,
            joints,
            keypoints,
            root,
            traversal,
            actuated,
        })
    }

    /// Number of actuated (non-fixed) joints.
    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    /// Joint indices of actuated joints, in declaration order. Position in
    /// this list is the angle index inside a [`JointConfig`].
    pub fn actuated_joints(&self) -> &[usize] {
        &self.actuated
    }

    /// Joint indices ordered parent-before-child for FK sweeps.
    pub fn traversal(&self) -> &[usize] {
        &self.traversal
    }

    /// `[lo, hi]` per actuated joint, in angle order.
    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.actuated.iter().map(|&ji| self.joints[ji].limits).collect()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn keypoint_index(&self, label: &str) -> Option<usize> {
        self.keypoints.iter().position(|k| k.label == label)
    }

    /// Angle index of a joint (position among actuated joints), if any.
    pub fn angle_index(&self, joint: usize) -> Option<usize> {
        self.actuated.iter().position(|&ji| ji == joint)
    }

    /// Rest configuration: identity base, zero angles clamped into limits.
    pub fn rest_config(&self) -> JointConfig {
        let angles = self
            .actuated
            .iter()
            .map(|&ji| {
                let (lo, hi) = self.joints[ji].limits;
                0.0f64.clamp(lo, hi)
            })
            .collect();
        JointConfig {
            base: Isometry3::identity(),
            angles,
        }
    }
}

/// The paper's `q`: a rigid base pose plus one value per actuated joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    pub base: Isometry3<f64>,
    pub angles: Vec<f64>,
}

impl JointConfig {
    pub fn new(base: Isometry3<f64>, angles: Vec<f64>) -> Self {
        JointConfig { base, angles }
    }

    /// Errors unless the angle count matches the model's DoF.
    pub fn check_dims(&self, model: &RobotModel) -> Result<()> {
        if self.angles.len() != model.dof() {
            return Err(Error::dim(model.dof(), self.angles.len(), "joint angles"));
        }
        Ok(())
    }
}

/// Per-link surface samples in link-local coordinates, concatenated into
/// one stable global index space (link 0's points first, then link 1's,
/// ...). The distance-matrix codec addresses robot points by this index.
#[derive(Debug, Clone)]
pub struct LinkPointSet {
    points: Vec<Vec<Point3<f64>>>,
    /// `offsets[l]` is the global index of link `l`'s first point;
    /// `offsets[n]` is the total count.
    offsets: Vec<usize>,
}

impl LinkPointSet {
    pub fn new(points: Vec<Vec<Point3<f64>>>) -> Self {
        let mut offsets = Vec::with_capacity(points.len() + 1);
        let mut acc = 0;
        for pts in &points {
            offsets.push(acc);
            acc += pts.len();
        }
        offsets.push(acc);
        LinkPointSet { points, offsets }
    }

    pub fn link_count(&self) -> usize {
        self.points.len()
    }

    /// Total number of points (the paper's N_R).
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn link_points(&self, link: usize) -> &[Point3<f64>] {
        &self.points[link]
    }

    /// Global index of `link`'s first point.
    pub fn offset(&self, link: usize) -> usize {
        self.offsets[link]
    }

    /// Link owning the point at a global index.
    pub fn link_of(&self, global: usize) -> usize {
        debug_assert!(global < self.total());
        // offsets is sorted; find the last offset ≤ global.
        match self.offsets.binary_search(&global) {
            Ok(mut i) => {
                // Zero-count links share offsets; step past them.
                while self.points[i].is_empty() {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        }
    }
}

/// Splits `total` into per-link counts proportional to `areas` using
/// largest-remainder rounding, so the counts sum to `total` exactly.
/// Links with zero area get zero points.
pub fn area_proportional_counts(areas: &[f64], total: usize) -> Result<Vec<usize>> {
    if areas.is_empty() {
        return Err(Error::Invalid("no link areas given".into()));
    }
    if areas.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
        return Err(Error::Invalid("link areas must be finite and nonnegative".into()));
    }
    let sum: f64 = areas.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Degenerate("total link area is zero".into()));
    }
    let quotas: Vec<f64> = areas.iter().map(|a| a / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // Hand remaining points to the largest fractional parts; ties break
    // toward lower index for determinism.
    let mut rema: Vec<(usize, f64)> = quotas
        .iter()
        .enumerate()
        .map(|(i, q)| (i, q - q.floor()))
        .collect();
    rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(total - assigned) {
        counts[rema[k % rema.len()].0] += 1;
    }
    Ok(counts)
}

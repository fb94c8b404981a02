//! The grasp record: one posed robot grasp on one object, with optional
//! quality metrics and evaluation verdict attached.

use serde::{Deserialize, Serialize};

use crate::eval::GraspVerdict;
use crate::kinematics::{JointConfig, RobotModel};
use crate::math::Pose;
use crate::metrics::QualityMetrics;
use crate::{Error, Result};

/// Where a grasp record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Reconstructed from a web image of a human demonstration.
    Web,
    /// Decoded from a predicted distance matrix.
    Decoded,
    /// Produced by the simulation-backed augmentation loop.
    SimAugmented,
}

/// One grasp: an object reference and pose plus a full robot configuration,
/// with optional metrics/verdict and a provenance tag.
///
/// The joint configuration is stored as a serializable base [`Pose`] plus the
/// actuated joint angles; use [`GraspRecord::joint_config`] to recover a
/// [`JointConfig`] for kinematics calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    /// Unique record id.
    pub id: String,
    /// Robot model name this configuration belongs to.
    pub robot: String,
    /// Object identifier (category or instance).
    pub object_id: String,
    /// Path of the object mesh, relative to the dataset manifest.
    pub object_mesh: String,
    /// Rigid pose of the object in the world frame.
    pub object_pose: Pose,
    /// Rigid pose of the robot root link in the world frame.
    pub base: Pose,
    /// Actuated joint values, in the robot's actuated-joint order.
    pub angles: Vec<f64>,
    /// Quality metrics, when computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<QualityMetrics>,
    /// Evaluation verdict, when computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<GraspVerdict>,
    /// How this record was produced.
    pub provenance: Provenance,
    /// Opaque reference to the source image, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image: Option<String>,
    /// RMS of the configuration-fit residual (meters) for decoded records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_rms: Option<f64>,
    /// Number of multilaterated points flagged infeasible during decoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible_points: Option<usize>,
}

impl GraspRecord {
    /// Build a bare record with no metrics, verdict, or decode diagnostics.
    pub fn new(
        id: impl Into<String>,
        robot: impl Into<String>,
        object_id: impl Into<String>,
        object_mesh: impl Into<String>,
        object_pose: Pose,
        q: &JointConfig,
        provenance: Provenance,
    ) -> Self {
        GraspRecord {
            id: id.into(),
            robot: robot.into(),
            object_id: object_id.into(),
            object_mesh: object_mesh.into(),
            object_pose,
            base: Pose::from_isometry(&q.base),
            angles: q.angles.clone(),
            metrics: None,
            verdict: None,
            provenance,
            source_image: None,
            fit_rms: None,
            infeasible_points: None,
        }
    }

    /// Recover the joint configuration (validates the stored quaternion).
    pub fn joint_config(&self) -> Result<JointConfig> {
        Ok(JointConfig::new(self.base.to_isometry()?, self.angles.clone()))
    }

    /// Replace the stored configuration.
    pub fn set_joint_config(&mut self, q: &JointConfig) {
        self.base = Pose::from_isometry(&q.base);
        self.angles = q.angles.clone();
    }

    /// Check that this record is consistent with `robot`: matching name and
    /// joint dimension, valid poses.
    pub fn validate_for(&self, robot: &RobotModel) -> Result<()> {
        if self.robot != robot.name {
            return Err(Error::Invalid(format!(
                "record {} targets robot '{}', not '{}'",
                self.id, self.robot, robot.name
            )));
        }
        if self.angles.len() != robot.dof() {
            return Err(Error::dim(
                robot.dof(),
                self.angles.len(),
                format!("joint angles of record {}", self.id),
            ));
        }
        self.object_pose.to_isometry()?;
        self.base.to_isometry()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Isometry3, Vector3};

    fn sample_record() -> GraspRecord {
        let q = JointConfig::new(
            Isometry3::new(Vector3::new(0.1, -0.2, 0.3), Vector3::new(0.0, 0.0, 0.7)),
            vec![0.1, 0.2, 0.3],
        );
        GraspRecord::new(
            "g-0001",
            "toy_hand",
            "mug",
            "meshes/mug.obj",
            Pose::identity(),
            &q,
            Provenance::Web,
        )
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let rec = sample_record();
        let text = serde_json::to_string(&rec).unwrap();
        let back: GraspRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(rec, back);
    }

    #[test]
    fn optional_fields_are_omitted_when_absent() {
        let text = serde_json::to_string(&sample_record()).unwrap();
        assert!(!text.contains("metrics"));
        assert!(!text.contains("verdict"));
        assert!(!text.contains("source_image"));
        assert!(text.contains("\"provenance\":\"web\""));
    }

    #[test]
    fn joint_config_round_trips() {
        let rec = sample_record();
        let q = rec.joint_config().unwrap();
        let mut rec2 = rec.clone();
        rec2.set_joint_config(&q);
        assert_eq!(rec, rec2);
    }

    #[test]
    fn provenance_uses_kebab_case() {
        let text = serde_json::to_string(&Provenance::SimAugmented).unwrap();
        assert_eq!(text, "\"sim-augmented\"");
    }
}

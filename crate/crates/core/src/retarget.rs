//! Human-hand keypoints to robot joint configurations.
//!
//! A detected human hand arrives as 21 keypoint positions (wrist plus four
//! joints per finger) with per-point confidences. A [`RetargetMapping`]
//! pairs a subset of those with named keypoints on the robot; [`retarget`]
//! then solves
//!
//! ```text
//!   min over (base, angles) of
//!       Σᵢ wᵢ·cᵢ·‖keypoint_fk(q)ᵢ − s·humanᵢ‖²  +  λ·‖angles − rest‖²
//! ```
//!
//! with the shared damped Gauss-Newton solver ([`crate::optim`]), joint
//! limits enforced by clamping. The base pose is optimized jointly with the
//! angles, and the solver steps in body-frame coordinates, so rigidly
//! moving the human keypoints moves the recovered base correspondingly
//! while leaving the finger angles untouched.

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{keypoint_fk, JointConfig, RobotModel};
use crate::optim::{solve_pose_angles, GnOptions};

/// Number of keypoints in the standard hand layout.
pub const HUMAN_KEYPOINTS: usize = 21;

/// One detected human hand: 21 ordered positions in meters, object frame.
///
/// Layout: index 0 is the wrist; finger `f` (thumb, index, middle, ring,
/// pinky) occupies indices `1+4f .. 4+4f` as MCP, PIP, DIP, TIP. The JSON
/// form is `{"keypoints": [[x,y,z]; 21], "confidence": [..; 21]}`, with
/// the confidence array optional (all ones when absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanHandKeypoints {
    pub keypoints: Vec<[f64; 3]>,
    /// Per-keypoint confidence in `[0, 1]`; multiplies the pair weight.
    #[serde(default = "unit_confidence")]
    pub confidence: Vec<f64>,
}

fn unit_confidence() -> Vec<f64> {
    vec![1.0; HUMAN_KEYPOINTS]
}

impl HumanHandKeypoints {
    /// Wraps a full-confidence point list.
    pub fn from_points(points: &[Point3<f64>]) -> Self {
        HumanHandKeypoints {
            keypoints: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            confidence: vec![1.0; points.len()],
        }
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        let [x, y, z] = self.keypoints[i];
        Point3::new(x, y, z)
    }

    /// Exactly 21 finite points, confidences in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.keypoints.len() != HUMAN_KEYPOINTS {
            return Err(Error::dim(
                HUMAN_KEYPOINTS,
                self.keypoints.len(),
                "human hand keypoints",
            ));
        }
        if self.confidence.len() != HUMAN_KEYPOINTS {
            return Err(Error::dim(
                HUMAN_KEYPOINTS,
                self.confidence.len(),
                "keypoint confidences",
            ));
        }
        for (i, p) in self.keypoints.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Invalid(format!("keypoint {i} is not finite")));
            }
        }
        for (i, &c) in self.confidence.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Invalid(format!(
                    "confidence {i} is {c}, outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// The same hand rigidly moved by `iso` (confidences preserved).
    pub fn transformed(&self, iso: &Isometry3<f64>) -> Self {
        HumanHandKeypoints {
            keypoints: self
                .keypoints
                .iter()
                .map(|&[x, y, z]| {
                    let p = iso * Point3::new(x, y, z);
                    [p.x, p.y, p.z]
                })
                .collect(),
            confidence: self.confidence.clone(),
        }
    }
}

/// One correspondence: a robot keypoint label chases a human keypoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingPair {
    pub robot_keypoint: String,
    pub human_index: usize,
    /// Relative weight in the least-squares objective (fingertips are
    /// conventionally 2×).
    #[serde(default = "one")]
    pub weight: f64,
}

/// Correspondences plus the two global knobs of the objective.
///
/// `scale` multiplies the human keypoints before fitting (for hands that
/// are not human-sized; leave at 1.0 when the object mesh is scaled
/// instead — use one knob or the other, never both). `rest_weight` is the
/// λ pulling angles toward the rest pose, which keeps occluded or
/// low-confidence fingers from wandering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetargetMapping {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "default_rest_weight")]
    pub rest_weight: f64,
    pub pairs: Vec<MappingPair>,
}

fn one() -> f64 {
    1.0
}

fn default_rest_weight() -> f64 {
    1e-3
}

impl RetargetMapping {
    /// Checks the mapping against a robot: every label must exist, every
    /// human index must be in range, weights nonnegative, scale positive,
    /// and at least four pairs must carry positive weight (fewer cannot
    /// pin down the 6-DoF base).
    pub fn validate(&self, robot: &RobotModel) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Invalid(format!(
                "mapping scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if !(self.rest_weight.is_finite() && self.rest_weight >= 0.0) {
            return Err(Error::Invalid(format!(
                "rest weight must be nonnegative and finite, got {}",
                self.rest_weight
            )));
        }
        let mut positive = 0;
        for pair in &self.pairs {
            if robot.keypoint_index(&pair.robot_keypoint).is_none() {
                return Err(Error::Invalid(format!(
                    "robot {:?} has no keypoint {:?}",
                    robot.name, pair.robot_keypoint
                )));
            }
            if pair.human_index >= HUMAN_KEYPOINTS {
                return Err(Error::Invalid(format!(
                    "human index {} out of range (< {HUMAN_KEYPOINTS})",
                    pair.human_index
                )));
            }
            if !(pair.weight.is_finite() && pair.weight >= 0.0) {
                return Err(Error::Invalid(format!(
                    "pair weight for {:?} must be nonnegative, got {}",
                    pair.robot_keypoint, pair.weight
                )));
            }
            if pair.weight > 0.0 {
                positive += 1;
            }
        }
        if positive < 4 {
            return Err(Error::Invalid(format!(
                "mapping needs at least 4 positively weighted pairs, got {positive}"
            )));
        }
        Ok(())
    }
}

/// Stopping controls for [`retarget`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetOptions {
    pub max_iters: usize,
    /// Stop when an accepted step improves the RMS residual by less than
    /// this (meters).
    pub tol: f64,
}

impl Default for RetargetOptions {
    fn default() -> Self {
        RetargetOptions {
            // Most fits land within ~30 iterations, but configurations
            // that ride a joint limit while the base unwinds can need a
            // few hundred; iterations are cheap at hand scale.
            max_iters: 500,
            tol: 1e-10,
        }
    }
}

/// What the optimizer achieved.
#[derive(Debug, Clone, Copy)]
pub struct RetargetReport {
    /// Final objective value: weighted squared keypoint errors plus the
    /// rest-pose regularizer.
    pub objective: f64,
    /// Unweighted RMS 3-D position error over the fitted pairs (meters):
    /// `sqrt(mean over pairs of ‖fk − s·human‖²)`.
    pub keypoint_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits a robot configuration to a detected human hand.
///
/// Starts from `q0` (angles clamped into limits) with the base rigidly
/// pre-aligned to the targets by weighted Kabsch, then jointly refines the
/// base pose and joint angles by damped Gauss-Newton on the weighted
/// keypoint residuals; see the module docs for the exact objective. A
/// second deterministic start with half-curled fingers guards against the
/// elbow ambiguity of two-segment fingers, the lower objective winning.
/// Pair weights are multiplied by the keypoint's confidence, and pairs
/// whose effective weight vanishes are dropped — at least four must
/// survive. Deterministic given its inputs.
pub fn retarget(
    kp: &HumanHandKeypoints,
    robot: &RobotModel,
    map: &RetargetMapping,
    q0: &JointConfig,
    opts: &RetargetOptions,
) -> Result<(JointConfig, RetargetReport)> {
    kp.validate()?;
    map.validate(robot)?;
    q0.check_dims(robot)?;

    // Resolve each surviving pair to (robot keypoint index, scaled target,
    // effective weight).
    let mut pairs: Vec<(usize, Point3<f64>, f64)> = Vec::with_capacity(map.pairs.len());
    for pair in &map.pairs {
        let w = pair.weight * kp.confidence[pair.human_index];
        if w > 0.0 {
            let ki = robot
                .keypoint_index(&pair.robot_keypoint)
                .expect("mapping validated");
            pairs.push((ki, kp.point(pair.human_index) * map.scale, w));
        }
    }
    if pairs.len() < 4 {
        return Err(Error::Invalid(format!(
            "only {} pairs have positive weight × confidence; need at least 4",
            pairs.len()
        )));
    }

    let sqrt_w: Vec<f64> = pairs.iter().map(|&(_, _, w)| w.sqrt()).collect();
    let rest = robot.rest_config().angles;
    let sqrt_lambda = map.rest_weight.sqrt();
    let limits = robot.limits();
    let dst: Vec<Point3<f64>> = pairs.iter().map(|&(_, t, _)| t).collect();
    let wts: Vec<f64> = pairs.iter().map(|&(_, _, w)| w).collect();
    let gn = GnOptions {
        max_iters: opts.max_iters,
        tol: opts.tol,
        ..GnOptions::default()
    };

    let solve_from = |start_angles: Vec<f64>| -> Result<(JointConfig, crate::optim::GnReport)> {
        // Coarse rigid pre-alignment: fit the start's keypoints to the
        // targets with weighted Kabsch so Gauss-Newton begins in the right
        // basin even when the detected hand is a half-turn away from q0.
        // An exactly fitting start yields the identity correction, so
        // fixed points survive, and Kabsch is rigid-equivariant, so the
        // whole solve stays equivariant.
        let mut base = q0.base;
        let mut angles = start_angles;
        let start = JointConfig::new(base, angles.clone());
        let world0 = keypoint_fk(robot, &start)?;
        let src: Vec<Point3<f64>> = pairs.iter().map(|&(ki, _, _)| world0[ki]).collect();
        if let Ok(align) = crate::math::kabsch(&src, &dst, Some(&wts)) {
            base = align * base;
        }

        let mut scratch = JointConfig::new(base, angles.clone());
        let report = solve_pose_angles(
            |b, a, out| {
                scratch.base = *b;
                scratch.angles.copy_from_slice(a);
                let world = keypoint_fk(robot, &scratch).expect("dims validated");
                out.clear();
                for (&(ki, target, _), &sw) in pairs.iter().zip(&sqrt_w) {
                    let d = world[ki] - target;
                    out.extend_from_slice(&[sw * d.x, sw * d.y, sw * d.z]);
                }
                if sqrt_lambda > 0.0 {
                    for (ai, ri) in a.iter().zip(&rest) {
                        out.push(sqrt_lambda * (ai - ri));
                    }
                }
            },
            &mut base,
            &mut angles,
            &limits,
            &gn,
        );
        Ok((JointConfig::new(base, angles), report))
    };

    // Gauss-Newton is local and two-segment fingers have an elbow
    // ambiguity (the tip is reachable with the knuckle under- or
    // over-curled), so refine from q0 and from a half-curled variant and
    // keep the lower objective; ties go to q0's own result.
    let (mut fitted, mut report) = solve_from(q0.angles.clone())?;
    let half_curl: Vec<f64> = limits.iter().map(|&(lo, hi)| lo + 0.5 * (hi - lo)).collect();
    if half_curl != q0.angles {
        let (alt, alt_report) = solve_from(half_curl)?;
        if alt_report.cost < report.cost {
            fitted = alt;
            report = alt_report;
        }
    }

    let world = keypoint_fk(robot, &fitted)?;
    let sq_sum: f64 = pairs
        .iter()
        .map(|&(ki, target, _)| (world[ki] - target).norm_squared())
        .sum();
    Ok((
        fitted,
        RetargetReport {
            objective: report.cost,
            keypoint_rms: (sq_sum / pairs.len() as f64).sqrt(),
            iterations: report.iterations,
            converged: report.converged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::parse_robot;
    use crate::math::seeded_rng;
    use nalgebra::{UnitQuaternion, Vector3};
    use rand::Rng;
    use std::path::Path;

    /// Palm with two 2-segment fingers: 4 DoF, 5 keypoints.
    fn two_finger_hand() -> RobotModel {
        let xml = r#"
            <robot name="two_finger">
              <link name="palm"/>
              <link name="f0_prox"/>
              <link name="f0_dist"/>
              <link name="f1_prox"/>
              <link name="f1_dist"/>
              <joint name="f0_mcp" type="revolute">
                <origin xyz="0.04 -0.02 0"/>
                <parent link="palm"/>
                <child link="f0_prox"/>
                <axis xyz="0 1 0"/>
                <limit lower="-0.2" upper="1.6"/>
              </joint>
              <joint name="f0_pip" type="revolute">
                <origin xyz="0.03 0 0"/>
                <parent link="f0_prox"/>
                <child link="f0_dist"/>
                <axis xyz="0 1 0"/>
                <limit lower="-0.2" upper="1.6"/>
              </joint>
              <joint name="f1_mcp" type="revolute">
                <origin xyz="0.04 0.02 0"/>
                <parent link="palm"/>
                <child link="f1_prox"/>
                <axis xyz="0 1 0"/>
                <limit lower="-0.2" upper="1.6"/>
              </joint>
              <joint name="f1_pip" type="revolute">
                <origin xyz="0.03 0 0"/>
                <parent link="f1_prox"/>
                <child link="f1_dist"/>
                <axis xyz="0 1 0"/>
                <limit lower="-0.2" upper="1.6"/>
              </joint>
              <keypoint name="palm" link="palm" xyz="0 0 0"/>
              <keypoint name="mid_0" link="f0_prox" xyz="0.03 0 0"/>
              <keypoint name="tip_0" link="f0_dist" xyz="0.03 0 0"/>
              <keypoint name="mid_1" link="f1_prox" xyz="0.03 0 0"/>
              <keypoint name="tip_1" link="f1_dist" xyz="0.03 0 0"/>
            </robot>"#;
        parse_robot(xml, Path::new(".")).unwrap()
    }

    /// Maps the five test-hand keypoints onto wrist / finger-0 / finger-1
    /// slots of the 21-point layout.
    fn two_finger_mapping(rest_weight: f64) -> RetargetMapping {
        let pair = |label: &str, idx: usize, weight: f64| MappingPair {
            robot_keypoint: label.into(),
            human_index: idx,
            weight,
        };
        RetargetMapping {
            scale: 1.0,
            rest_weight,
            pairs: vec![
                pair("palm", 0, 1.0),
                pair("mid_0", 2, 1.0),
                pair("tip_0", 4, 2.0),
                pair("mid_1", 6, 1.0),
                pair("tip_1", 8, 2.0),
            ],
        }
    }

    /// Builds the 21-point hand whose mapped slots hold the robot's own
    /// keypoints at `q`; unmapped slots sit at the origin.
    fn targets_from(robot: &RobotModel, map: &RetargetMapping, q: &JointConfig) -> HumanHandKeypoints {
        let world = keypoint_fk(robot, q).unwrap();
        let mut pts = vec![[0.0; 3]; HUMAN_KEYPOINTS];
        for pair in &map.pairs {
            let ki = robot.keypoint_index(&pair.robot_keypoint).unwrap();
            let p = world[ki] / map.scale;
            pts[pair.human_index] = [p.x, p.y, p.z];
        }
        HumanHandKeypoints {
            keypoints: pts,
            confidence: vec![1.0; HUMAN_KEYPOINTS],
        }
    }

    fn random_config(robot: &RobotModel, rng: &mut impl Rng, max_angle: f64) -> JointConfig {
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let base = Isometry3::from_parts(
            Vector3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            )
            .into(),
            UnitQuaternion::from_scaled_axis(axis * rng.gen_range(0.0..max_angle)),
        );
        let angles = robot
            .limits()
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..hi))
            .collect();
        JointConfig::new(base, angles)
    }

    #[test]
    fn keypoints_json_round_trip_and_default_confidence() {
        let json = format!(
            "{{\"keypoints\": [{}]}}",
            vec!["[0.01, 0.02, 0.03]"; 21].join(", ")
        );
        let kp: HumanHandKeypoints = serde_json::from_str(&json).unwrap();
        kp.validate().unwrap();
        assert_eq!(kp.confidence, vec![1.0; 21]);
        assert_eq!(kp.point(5), Point3::new(0.01, 0.02, 0.03));

        let back: HumanHandKeypoints =
            serde_json::from_str(&serde_json::to_string(&kp).unwrap()).unwrap();
        assert_eq!(back.keypoints, kp.keypoints);
        assert_eq!(back.confidence, kp.confidence);
    }

    #[test]
    fn keypoints_validation_rejects_bad_input() {
        let mut kp = HumanHandKeypoints::from_points(&vec![Point3::origin(); 21]);
        kp.keypoints.pop();
        assert!(kp.validate().is_err(), "20 points");

        let mut kp = HumanHandKeypoints::from_points(&vec![Point3::origin(); 21]);
        kp.keypoints[3] = [f64::NAN, 0.0, 0.0];
        assert!(kp.validate().is_err(), "non-finite point");

        let mut kp = HumanHandKeypoints::from_points(&vec![Point3::origin(); 21]);
        kp.confidence[7] = 1.5;
        assert!(kp.validate().is_err(), "confidence above 1");

        let mut kp = HumanHandKeypoints::from_points(&vec![Point3::origin(); 21]);
        kp.confidence[7] = -0.1;
        assert!(kp.validate().is_err(), "negative confidence");
    }

    #[test]
    fn mapping_validation_rejects_bad_input() {
        let robot = two_finger_hand();
        assert!(two_finger_mapping(0.0).validate(&robot).is_ok());

        let mut m = two_finger_mapping(0.0);
        m.scale = 0.0;
        assert!(m.validate(&robot).is_err(), "zero scale");

        let mut m = two_finger_mapping(0.0);
        m.rest_weight = -1.0;
        assert!(m.validate(&robot).is_err(), "negative rest weight");

        let mut m = two_finger_mapping(0.0);
        m.pairs[0].robot_keypoint = "nose".into();
        assert!(m.validate(&robot).is_err(), "unknown label");

        let mut m = two_finger_mapping(0.0);
        m.pairs[0].human_index = 21;
        assert!(m.validate(&robot).is_err(), "human index out of range");

        let mut m = two_finger_mapping(0.0);
        m.pairs[0].weight = -0.5;
        assert!(m.validate(&robot).is_err(), "negative weight");

        let mut m = two_finger_mapping(0.0);
        for p in &mut m.pairs[..2] {
            p.weight = 0.0;
        }
        assert!(m.validate(&robot).is_err(), "only 3 positive pairs");
    }

    #[test]
    fn fixed_point_returns_q0_unchanged() {
        let robot = two_finger_hand();
        let map = two_finger_mapping(1e-3);
        let q0 = robot.rest_config();
        let kp = targets_from(&robot, &map, &q0);

        let (q, report) = retarget(&kp, &robot, &map, &q0, &RetargetOptions::default()).unwrap();
        // At rest the keypoint term and the regularizer are both exactly
        // zero, so the start is the global minimum.
        assert!(report.keypoint_rms < 1e-12, "rms {}", report.keypoint_rms);
        assert!((q.base.translation.vector - q0.base.translation.vector).norm() < 1e-9);
        assert!(q.base.rotation.rotation_to(&q0.base.rotation).angle() < 1e-9);
        for (a, b) in q.angles.iter().zip(&q0.angles) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn self_consistency_recovers_random_configs() {
        let robot = two_finger_hand();
        let map = two_finger_mapping(0.0);
        let limits = robot.limits();
        let mut rng = seeded_rng(42);

        for case in 0..10 {
            let truth = random_config(&robot, &mut rng, 1.5);
            let kp = targets_from(&robot, &map, &truth);
            let (q, report) = retarget(
                &kp,
                &robot,
                &map,
                &robot.rest_config(),
                &RetargetOptions::default(),
            )
            .unwrap();

            assert!(
                report.keypoint_rms < 1e-6,
                "case {case}: rms {}",
                report.keypoint_rms
            );
            for (i, (a, t)) in q.angles.iter().zip(&truth.angles).enumerate() {
                assert!(
                    (a - t).abs() < 1e-3,
                    "case {case} angle {i}: {a} vs {t}"
                );
                let (lo, hi) = limits[i];
                assert!(*a >= lo - 1e-12 && *a <= hi + 1e-12, "limits hold");
            }
        }
    }

    #[test]
    fn scale_is_applied_to_human_keypoints() {
        let robot = two_finger_hand();
        let mut map = two_finger_mapping(0.0);
        map.scale = 2.0;
        let mut rng = seeded_rng(7);
        let truth = random_config(&robot, &mut rng, 1.0);
        // targets_from divides by the scale, so the fit must re-apply it.
        let kp = targets_from(&robot, &map, &truth);
        let (_, report) = retarget(
            &kp,
            &robot,
            &map,
            &robot.rest_config(),
            &RetargetOptions::default(),
        )
        .unwrap();
        assert!(report.keypoint_rms < 1e-6, "rms {}", report.keypoint_rms);
    }

    #[test]
    fn opposing_far_targets_saturate_every_limit() {
        // A coherent far target would just be chased by the free base, and
        // a revolute joint's pull direction rotates with the joint, so the
        // cleanest saturation probe is a hand with prismatic fingers whose
        // travel directions oppose pairwise: a heavily weighted palm tripod
        // pins the base, each tip is pulled 10 m outward along its own
        // track, and every joint must ram a bound exactly while the
        // residual stays at target scale.
        let xml = r#"
            <robot name="slider_hand">
              <link name="palm"/>
              <link name="tip_px"/>
              <link name="tip_mx"/>
              <link name="tip_pz"/>
              <link name="tip_mz"/>
              <joint name="slide_px" type="prismatic">
                <origin xyz="0.05 0 0"/>
                <parent link="palm"/>
                <child link="tip_px"/>
                <axis xyz="1 0 0"/>
                <limit lower="-0.01" upper="0.02"/>
              </joint>
              <joint name="slide_mx" type="prismatic">
                <origin xyz="-0.05 0 0"/>
                <parent link="palm"/>
                <child link="tip_mx"/>
                <axis xyz="1 0 0"/>
                <limit lower="-0.01" upper="0.02"/>
              </joint>
              <joint name="slide_pz" type="prismatic">
                <origin xyz="0 0 0.05"/>
                <parent link="palm"/>
                <child link="tip_pz"/>
                <axis xyz="0 0 1"/>
                <limit lower="-0.01" upper="0.02"/>
              </joint>
              <joint name="slide_mz" type="prismatic">
                <origin xyz="0 0 -0.05"/>
                <parent link="palm"/>
                <child link="tip_mz"/>
                <axis xyz="0 0 1"/>
                <limit lower="-0.01" upper="0.02"/>
              </joint>
              <keypoint name="palm_a" link="palm" xyz="0.02 0 0"/>
              <keypoint name="palm_b" link="palm" xyz="-0.01 0.017 0"/>
              <keypoint name="palm_c" link="palm" xyz="-0.01 -0.017 0"/>
              <keypoint name="tip_px" link="tip_px" xyz="0 0 0"/>
              <keypoint name="tip_mx" link="tip_mx" xyz="0 0 0"/>
              <keypoint name="tip_pz" link="tip_pz" xyz="0 0 0"/>
              <keypoint name="tip_mz" link="tip_mz" xyz="0 0 0"/>
            </robot>"#;
        let robot = parse_robot(xml, Path::new(".")).unwrap();
        let pair = |label: &str, idx: usize, weight: f64| MappingPair {
            robot_keypoint: label.into(),
            human_index: idx,
            weight,
        };
        let map = RetargetMapping {
            scale: 1.0,
            rest_weight: 0.0,
            pairs: vec![
                pair("palm_a", 0, 4.0),
                pair("palm_b", 1, 4.0),
                pair("palm_c", 2, 4.0),
                pair("tip_px", 4, 1.0),
                pair("tip_mx", 8, 1.0),
                pair("tip_pz", 12, 1.0),
                pair("tip_mz", 16, 1.0),
            ],
        };
        let q0 = robot.rest_config();
        let mut kp = targets_from(&robot, &map, &q0);
        let pull = [
            ("tip_px", 4, Vector3::new(10.0, 0.0, 0.0)),
            ("tip_mx", 8, Vector3::new(-10.0, 0.0, 0.0)),
            ("tip_pz", 12, Vector3::new(0.0, 0.0, 10.0)),
            ("tip_mz", 16, Vector3::new(0.0, 0.0, -10.0)),
        ];
        let world = keypoint_fk(&robot, &q0).unwrap();
        for (label, idx, dir) in pull {
            let ki = robot.keypoint_index(label).unwrap();
            let p = world[ki] + dir;
            kp.keypoints[idx] = [p.x, p.y, p.z];
        }

        let (q, report) = retarget(&kp, &robot, &map, &q0, &RetargetOptions::default()).unwrap();
        assert!(report.keypoint_rms.is_finite(), "no divergence");
        assert!(
            report.keypoint_rms > 5.0 && report.keypoint_rms < 11.0,
            "rms {} should stay at target scale",
            report.keypoint_rms
        );
        // Outward is axis-positive for the +x/+z fingers and axis-negative
        // for the −x/−z ones, so the bounds alternate.
        let expect = [0.02, -0.01, 0.02, -0.01];
        for (i, (&a, &e)) in q.angles.iter().zip(&expect).enumerate() {
            assert!(a == e, "angle {i} = {a}, expected clamp at {e}");
        }
        assert!(
            q.base.translation.vector.norm() < 0.01,
            "tripod keeps the base pinned"
        );
    }

    #[test]
    fn objective_non_increasing_in_iteration_budget() {
        // The solver rerun with a larger budget replays the same accepted
        // steps, so the final objective as a function of max_iters traces
        // the per-step objective values.
        let robot = two_finger_hand();
        let map = two_finger_mapping(1e-3);
        let mut rng = seeded_rng(11);
        let truth = random_config(&robot, &mut rng, 1.2);
        let kp = targets_from(&robot, &map, &truth);

        let mut last = f64::INFINITY;
        for max_iters in 1..=8 {
            let (_, report) = retarget(
                &kp,
                &robot,
                &map,
                &robot.rest_config(),
                &RetargetOptions {
                    max_iters,
                    ..RetargetOptions::default()
                },
            )
            .unwrap();
            assert!(
                report.objective <= last + 1e-15,
                "objective rose at budget {max_iters}: {} -> {}",
                last,
                report.objective
            );
            last = report.objective;
        }
    }

    #[test]
    fn rigid_motion_of_targets_moves_base_not_fingers() {
        let robot = two_finger_hand();
        let map = two_finger_mapping(1e-3);
        let mut rng = seeded_rng(19);
        let truth = random_config(&robot, &mut rng, 1.0);
        let kp = targets_from(&robot, &map, &truth);

        let (q_ref, _) = retarget(
            &kp,
            &robot,
            &map,
            &robot.rest_config(),
            &RetargetOptions::default(),
        )
        .unwrap();

        for case in 0..5 {
            let iso = Isometry3::from_parts(
                Vector3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                )
                .into(),
                UnitQuaternion::from_scaled_axis(Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )),
            );
            // Same q0 on purpose: the rigid pre-alignment hands both
            // solves the same local problem expressed in moved frames.
            let (q, _) = retarget(
                &kp.transformed(&iso),
                &robot,
                &map,
                &robot.rest_config(),
                &RetargetOptions::default(),
            )
            .unwrap();

            for (i, (a, b)) in q.angles.iter().zip(&q_ref.angles).enumerate() {
                assert!(
                    (a - b).abs() < 1e-6,
                    "case {case} angle {i} drifted: {a} vs {b}"
                );
            }
            let expect = iso * q_ref.base;
            assert!(
                q.base.rotation.rotation_to(&expect.rotation).angle() < 1e-6,
                "case {case}: base rotation should follow the rigid motion"
            );
            assert!(
                (q.base.translation.vector - expect.translation.vector).norm() < 1e-6,
                "case {case}: base translation should follow the rigid motion"
            );
        }
    }

    #[test]
    fn zero_confidence_drops_pairs_and_errors_below_four() {
        let robot = two_finger_hand();
        let map = two_finger_mapping(1e-3);
        let q0 = robot.rest_config();
        let mut kp = targets_from(&robot, &map, &q0);

        // Garbage position with zero confidence must not disturb the fit.
        kp.keypoints[8] = [1e6, -1e6, 1e6];
        kp.confidence[8] = 0.0;
        let (_, report) = retarget(&kp, &robot, &map, &q0, &RetargetOptions::default()).unwrap();
        assert!(report.keypoint_rms < 1e-9, "rms {}", report.keypoint_rms);

        // Dropping below four effective pairs is an error.
        kp.confidence[4] = 0.0;
        kp.confidence[6] = 0.0;
        let err = retarget(&kp, &robot, &map, &q0, &RetargetOptions::default()).unwrap_err();
        assert!(err.to_string().contains("at least 4"), "{err}");
    }

    #[test]
    fn fixture_mapping_matches_fixture_hand() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
        let robot = crate::kinematics::load_robot(&dir.join("toy_hand/hand.xml")).unwrap();
        let text = std::fs::read_to_string(dir.join("retarget/mano_mapping.json")).unwrap();
        let map: RetargetMapping = serde_json::from_str(&text).unwrap();
        map.validate(&robot).unwrap();
        assert_eq!(map.pairs.len(), 11);

        let mut rng = seeded_rng(3);
        let truth = random_config(&robot, &mut rng, 1.0);
        let mut map_exact = map.clone();
        map_exact.rest_weight = 0.0;
        let kp = targets_from(&robot, &map_exact, &truth);
        let (q, report) = retarget(
            &kp,
            &robot,
            &map_exact,
            &robot.rest_config(),
            &RetargetOptions::default(),
        )
        .unwrap();
        assert!(report.keypoint_rms < 1e-6, "rms {}", report.keypoint_rms);
        for (a, t) in q.angles.iter().zip(&truth.angles) {
            assert!((a - t).abs() < 1e-3, "{a} vs {t}");
        }
    }
}

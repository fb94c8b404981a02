//! Contact extraction and force-closure grasp evaluation.
//!
//! This is the physics-free stand-in for a dynamic disturbance test: a grasp
//! is accepted when its contact set achieves ε force closure and the hand
//! does not penetrate the object beyond a gate. ε is the classic
//! Ferrari-Canny quality — the radius of the largest origin-centered ball
//! inside the convex hull of contact wrench primitives — estimated over a
//! fixed set of sampled 6-D directions.

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3, Vector6};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::TriMesh;
use crate::kinematics::{point_cloud_fk, LinkPointSet, RobotModel};
use crate::math::seeded_rng;
use crate::metrics::penetration_depth;
use crate::optim::{solve_pose_angles, GnOptions};
use crate::pipeline::GraspRecord;
use crate::{Error, Result};

/// Central-difference step (meters) for SDF gradients.
const SDF_GRAD_STEP: f64 = 1e-4;
/// Minimum spacing between two contacts on the same link, cm.
const CONTACT_CLUSTER_CM: f64 = 0.5;
/// Number of sampled 6-D directions for the ε estimate.
const EPS_DIRECTIONS: usize = 74;
/// Seed for the direction set; fixed so ε is a deterministic function of its
/// inputs.
const DIRECTION_SEED: u64 = 0x6472_6f36;
/// Relative tolerance for the origin-outside-hull gate.
const GATE_REL_TOL: f64 = 1e-9;

/// One hand-object contact.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    /// Contact location projected onto the object surface (meters).
    pub position: Point3<f64>,
    /// Unit normal pointing into the object (negated SDF gradient).
    pub normal: Vector3<f64>,
    /// Robot link the contacting hand point belongs to.
    pub link: usize,
    /// Whether the originating hand point was inside the object.
    pub penetrating: bool,
}

/// Evaluation thresholds; echoed into every verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Friction-cone linearization facets.
    pub facets: usize,
    /// Minimum ε for success.
    pub eps_min: f64,
    /// Maximum allowed penetration depth, cm.
    pub penetration_gate_cm: f64,
    /// Contact detection threshold, cm.
    pub contact_threshold_cm: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mu: 0.5,
            facets: 8,
            eps_min: 0.05,
            penetration_gate_cm: 0.5,
            contact_threshold_cm: 0.5,
        }
    }
}

impl EvalConfig {
    /// Check threshold sanity: positive friction, enough cone facets,
    /// nonnegative gates.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Invalid(format!("friction mu must be positive, got {}", self.mu)));
        }
        if self.facets < 3 {
            return Err(Error::Invalid(format!(
                "friction cone needs at least 3 facets, got {}",
                self.facets
            )));
        }
        if !(self.eps_min.is_finite() && self.eps_min >= 0.0) {
            return Err(Error::Invalid(format!("eps_min must be >= 0, got {}", self.eps_min)));
        }
        if !(self.penetration_gate_cm.is_finite() && self.penetration_gate_cm >= 0.0) {
            return Err(Error::Invalid(format!(
                "penetration gate must be >= 0, got {} cm",
                self.penetration_gate_cm
            )));
        }
        if !(self.contact_threshold_cm.is_finite() && self.contact_threshold_cm > 0.0) {
            return Err(Error::Invalid(format!(
                "contact threshold must be positive, got {} cm",
                self.contact_threshold_cm
            )));
        }
        Ok(())
    }
}

/// Accept/reject verdict for one grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspVerdict {
    /// `epsilon >= eps_min` and the penetration gate passed.
    pub success: bool,
    /// Force-closure quality, ≥ 0.
    pub epsilon: f64,
    /// Number of extracted contacts.
    pub contacts: usize,
    /// Max penetration depth of the hand cloud, cm.
    pub penetration_depth_cm: f64,
    /// Whether the depth was within the gate.
    pub penetration_ok: bool,
    /// Thresholds this verdict was computed with.
    pub config: EvalConfig,
}

impl GraspVerdict {
    /// Check the success ⇒ gates-passed invariant.
    pub fn validate(&self) -> Result<()> {
        let gates_ok = self.epsilon >= self.config.eps_min && self.penetration_ok;
        if self.success != gates_ok {
            return Err(Error::Internal(format!(
                "verdict success={} disagrees with gates (epsilon {}, depth {} cm)",
                self.success, self.epsilon, self.penetration_depth_cm
            )));
        }
        Ok(())
    }
}

/// Extract hand-object contacts for a posed grasp.
///
/// Hand points whose |SDF| is within `threshold_cm` become contacts: the
/// point is projected to the closest surface point and the normal is the
/// negated central-difference SDF gradient at the hand point. Contacts are
/// then greedily thinned (in hand-point order) so no two on the same link
/// are within 0.5 cm of each other.
pub fn extract_contacts(
    grasp: &GraspRecord,
    robot: &RobotModel,
    pts: &LinkPointSet,
    object: &TriMesh,
    threshold_cm: f64,
) -> Result<Vec<ContactPoint>> {
    if !(threshold_cm > 0.0) {
        return Err(Error::Invalid(format!(
            "contact threshold must be positive, got {threshold_cm} cm"
        )));
    }
    if !object.is_watertight() {
        return Err(Error::NotWatertight(
            "contact extraction needs a watertight object mesh".into(),
        ));
    }
    grasp.validate_for(robot)?;
    let posed = object.transformed(&grasp.object_pose.to_isometry()?);
    let q = grasp.joint_config()?;
    let hand = point_cloud_fk(robot, &q, pts)?;
    let segments = hand.segments.as_ref().ok_or_else(|| {
        Error::Internal("hand cloud from point_cloud_fk is missing segment labels".into())
    })?;

    let threshold = threshold_cm / 100.0;
    let cluster = CONTACT_CLUSTER_CM / 100.0;
    let mut contacts: Vec<ContactPoint> = Vec::new();
    for (p, link) in hand.points.iter().zip(segments) {
        let sdf = posed.signed_distance(p);
        if sdf.abs() > threshold {
            continue;
        }
        let Some(normal) = sdf_normal(&posed, p) else {
            continue;
        };
        let (position, _) = posed.closest_point(p);
        let link = *link as usize;
        let crowded = contacts
            .iter()
            .any(|c| c.link == link && (c.position - position).norm() < cluster);
        if crowded {
            continue;
        }
        contacts.push(ContactPoint {
            position,
            normal,
            link,
            penetrating: sdf < 0.0,
        });
    }
    Ok(contacts)
}

/// Unit normal pointing into the object at `p`: the negated central-
/// difference gradient of the signed distance. `None` when the gradient is
/// degenerate (e.g. at the medial axis).
fn sdf_normal(object: &TriMesh, p: &Point3<f64>) -> Option<Vector3<f64>> {
    let h = SDF_GRAD_STEP;
    let mut g = Vector3::zeros();
    for k in 0..3 {
        let mut hi = *p;
        let mut lo = *p;
        hi[k] += h;
        lo[k] -= h;
        g[k] = (object.signed_distance(&hi) - object.signed_distance(&lo)) / (2.0 * h);
    }
    let n = g.norm();
    if n < 1e-6 {
        return None;
    }
    Some(-g / n)
}

/// Ferrari-Canny ε force-closure quality over sampled directions.
///
/// Each friction cone is linearized into `facets` primitives with unit
/// normal component, `f = n̂ + μ(cos φ t̂_u + sin φ t̂_v)`; the wrench of a
/// primitive is `(f, (p − c) × f / torque_scale)` about the centroid `c`
/// (mean contact position when not supplied). ε is the minimum over a fixed
/// direction set of the support of the wrench hull: for each unit direction
/// `u`, the LP `max ⟨w, u⟩` over convex combinations of primitives attains
/// its optimum at a vertex, so the per-direction solve reduces to a max over
/// primitives. Returns 0 when the origin lies outside the wrench hull
/// (tested exactly with a min-norm-point solve) — in particular for any
/// single contact.
///
/// The direction set and tangent bases are built in a canonical frame
/// derived from the contacts themselves, so ε is invariant under a rigid
/// transform applied to all contacts and the centroid.
///
/// Being a minimum over finitely many directions, the estimate upper-bounds
/// the true inscribed-ball radius; on nearly flat wrench hulls (e.g. rim
/// grasps as μ → 0) it decays monotonically to a positive sampling floor
/// rather than all the way to 0. Densifying the direction set lowers that
/// floor.
pub fn force_closure_epsilon(
    contacts: &[ContactPoint],
    mu: f64,
    facets: usize,
    torque_scale: f64,
    centroid: Option<Point3<f64>>,
) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Invalid(format!("friction mu must be positive, got {mu}")));
    }
    if facets < 3 {
        return Err(Error::Invalid(format!(
            "friction cone needs at least 3 facets, got {facets}"
        )));
    }
    if !(torque_scale > 0.0) || !torque_scale.is_finite() {
        return Err(Error::Invalid(format!(
            "torque scale must be positive and finite, got {torque_scale}"
        )));
    }
    if contacts.is_empty() {
        return Ok(0.0);
    }
    let mut normals = Vec::with_capacity(contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        let n = c.normal.norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!(
                "contact {i} normal has norm {n}, expected a unit vector"
            )));
        }
        normals.push(c.normal / n);
    }

    let c = centroid.unwrap_or_else(|| {
        let sum: Vector3<f64> = contacts.iter().map(|c| c.position.coords).sum();
        Point3::from(sum / contacts.len() as f64)
    });
    let frame = canonical_frame(contacts, &normals);

    // Wrench primitives.
    let mut wrenches: Vec<Vector6<f64>> = Vec::with_capacity(contacts.len() * facets);
    for (contact, normal) in contacts.iter().zip(&normals) {
        let (tu, tv) = tangent_basis(normal, &frame);
        let arm = contact.position - c;
        for k in 0..facets {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / facets as f64;
            let f = normal + mu * (phi.cos() * tu + phi.sin() * tv);
            let tau = arm.cross(&f) / torque_scale;
            let mut w = Vector6::zeros();
            w.fixed_rows_mut::<3>(0).copy_from(&f);
            w.fixed_rows_mut::<3>(3).copy_from(&tau);
            wrenches.push(w);
        }
    }

    // Gate: ε = 0 when the origin is outside the wrench hull.
    let scale = wrenches.iter().map(|w| w.norm()).fold(0.0f64, f64::max);
    let gap = min_norm_point(&wrenches);
    if gap > GATE_REL_TOL * scale {
        return Ok(0.0);
    }

    // ε = min over sampled directions of the hull support. Directions are
    // drawn once in frame coordinates and rotated into the working frame so
    // the estimate co-rotates with the contacts.
    let mut eps = f64::INFINITY;
    for dir in direction_set() {
        let u_f = frame * Vector3::new(dir[0], dir[1], dir[2]);
        let u_t = frame * Vector3::new(dir[3], dir[4], dir[5]);
        let mut u = Vector6::zeros();
        u.fixed_rows_mut::<3>(0).copy_from(&u_f);
        u.fixed_rows_mut::<3>(3).copy_from(&u_t);
        let support = wrenches
            .iter()
            .map(|w| w.dot(&u))
            .fold(f64::NEG_INFINITY, f64::max);
        eps = eps.min(support);
    }
    Ok(eps.max(0.0))
}

/// Deterministic canonical rotation built from the contact set: the first
/// contact normal, completed by the first direction (relative positions,
/// then other normals) with a usable perpendicular component. Covariant
/// under rigid transforms of the contacts; appending contacts does not
/// disturb a frame already resolved by earlier ones.
fn canonical_frame(contacts: &[ContactPoint], normals: &[Vector3<f64>]) -> Matrix3<f64> {
    let e1 = normals[0];
    let mut e2 = None;
    'search: for i in 1..contacts.len() {
        let rel = contacts[i].position - contacts[0].position;
        for cand in [rel, normals[i]] {
            let perp = cand - e1 * e1.dot(&cand);
            if perp.norm() > 1e-8 * (1.0 + cand.norm()) {
                e2 = Some(perp.normalize());
                break 'search;
            }
        }
    }
    let e2 = e2.unwrap_or_else(|| {
        // Fully axial contact set: any completion works because both the
        // tangent bases and the direction set co-rotate with the choice.
        let axis = if e1.x.abs() <= 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        (axis - e1 * e1.dot(&axis)).normalize()
    });
    let e3 = e1.cross(&e2);
    Matrix3::from_columns(&[e1, e2, e3])
}

/// Orthonormal tangent pair for a contact normal, derived from the
/// canonical frame axes so it co-rotates with the contact set.
fn tangent_basis(normal: &Vector3<f64>, frame: &Matrix3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    for col in [1usize, 2, 0] {
        let axis: Vector3<f64> = frame.column(col).into();
        let perp = axis - normal * normal.dot(&axis);
        if perp.norm() > 1e-6 {
            let tu = perp.normalize();
            return (tu, normal.cross(&tu));
        }
    }
    unreachable!("frame columns are orthonormal; at least two are transverse to the normal");
}

/// The fixed 6-D unit direction set, in canonical-frame coordinates.
fn direction_set() -> Vec<[f64; 6]> {
    let mut rng = seeded_rng(DIRECTION_SEED);
    let mut gauss = move || {
        // Box-Muller; the uniform draw is clamped away from zero.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut dirs = Vec::with_capacity(EPS_DIRECTIONS);
    while dirs.len() < EPS_DIRECTIONS {
        let mut d = [0.0; 6];
        for v in &mut d {
            *v = gauss();
        }
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for v in &mut d {
            *v /= norm;
        }
        dirs.push(d);
    }
    dirs
}

/// Distance from the origin to the convex hull of `points` (0 when the
/// origin is inside), by Wolfe's min-norm-point algorithm: grow an affinely
/// independent active set, solve the equality-constrained least-squares
/// projection onto its affine hull, and step back into the simplex when a
/// coefficient leaves it. Terminates when no point improves the support
/// certificate `⟨p, x⟩ ≥ ‖x‖²`.
fn min_norm_point(points: &[Vector6<f64>]) -> f64 {
    let scale2 = points
        .iter()
        .map(|p| p.norm_squared())
        .fold(0.0f64, f64::max);
    if scale2 == 0.0 {
        return 0.0;
    }
    let tol = 1e-12 * scale2;

    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = points[start];

    for _ in 0..200 {
        // Support step: the hull point most opposed to x.
        let j = (0..points.len())
            .min_by(|&a, &b| points[a].dot(&x).total_cmp(&points[b].dot(&x)))
            .unwrap();
        if points[j].dot(&x) >= x.norm_squared() - tol {
            break;
        }
        if active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        // Minor cycle: project onto the affine hull of the active set and
        // clip back into the simplex until the projection is interior.
        loop {
            let alpha = affine_min_norm(points, &active);
            if alpha.iter().all(|&a| a > 1e-12) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-12 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let keep: Vec<usize> = (0..active.len())
                .filter(|&i| lambda[i] > 1e-12)
                .collect();
            if keep.len() == active.len() {
                // Numerical stalemate; accept the clipped point.
                break;
            }
            active = keep.iter().map(|&i| active[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
        }
        let total: f64 = lambda.iter().sum();
        x = Vector6::zeros();
        for (i, l) in active.iter().zip(&lambda) {
            x += points[*i] * (*l / total);
        }
        if x.norm_squared() <= tol {
            return 0.0;
        }
    }
    x.norm()
}

/// Minimize ‖Σ αᵢ pᵢ‖ subject to Σ αᵢ = 1 (signs free) over the active set,
/// via the KKT system of the equality-constrained least-squares problem.
fn affine_min_norm(points: &[Vector6<f64>], active: &[usize]) -> Vec<f64> {
    let m = active.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    for r in 0..m {
        for col in 0..m {
            kkt[(r, col)] = points[active[r]].dot(&points[active[col]]);
        }
        kkt[(r, r)] += 1e-14;
        kkt[(r, m)] = 1.0;
        kkt[(m, r)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    match kkt.lu().solve(&rhs) {
        Some(sol) => sol.rows(0, m).iter().copied().collect(),
        // Degenerate active set: fall back to the uniform combination.
        None => vec![1.0 / m as f64; m],
    }
}

/// Evaluate one grasp: extract contacts, compute ε about the object's
/// surface centroid with the object's bounding-box diagonal as torque
/// scale, gate on penetration depth, and emit the verdict.
pub fn evaluate_grasp(
    grasp: &GraspRecord,
    robot: &RobotModel,
    pts: &LinkPointSet,
    object: &TriMesh,
    cfg: &EvalConfig,
) -> Result<GraspVerdict> {
    let contacts = extract_contacts(grasp, robot, pts, object, cfg.contact_threshold_cm)?;

    let object_pose = grasp.object_pose.to_isometry()?;
    let posed = object.transformed(&object_pose);
    let q = grasp.joint_config()?;
    let hand = point_cloud_fk(robot, &q, pts)?;
    let depth = penetration_depth(&hand, &posed)?;

    let (lo, hi) = object.aabb();
    let torque_scale = (hi - lo).norm();
    let epsilon = force_closure_epsilon(
        &contacts,
        cfg.mu,
        cfg.facets,
        torque_scale,
        Some(surface_centroid(&posed)),
    )?;

    let penetration_ok = depth <= cfg.penetration_gate_cm;
    let verdict = GraspVerdict {
        success: epsilon >= cfg.eps_min && penetration_ok,
        epsilon,
        contacts: contacts.len(),
        penetration_depth_cm: depth,
        penetration_ok,
        config: cfg.clone(),
    };
    verdict.validate()?;
    Ok(verdict)
}

/// Area-weighted centroid of the mesh surface.
fn surface_centroid(mesh: &TriMesh) -> Point3<f64> {
    let mut acc = Vector3::zeros();
    for t in 0..mesh.triangles().len() {
        let (a, b, c) = mesh.triangle(t);
        acc += (a.coords + b.coords + c.coords) / 3.0 * mesh.areas()[t];
    }
    Point3::from(acc / mesh.total_area())
}

/// Depenetration pass: nudge the configuration so penetrating hand points
/// move back to the surface, by Gauss-Newton on the hinge residuals
/// `min(sdf, 0)` over all hand points. Returns the corrected record with any
/// stale metrics/verdict cleared.
pub fn depenetrate(
    grasp: &GraspRecord,
    robot: &RobotModel,
    pts: &LinkPointSet,
    object: &TriMesh,
) -> Result<GraspRecord> {
    grasp.validate_for(robot)?;
    let posed = object.transformed(&grasp.object_pose.to_isometry()?);
    let q = grasp.joint_config()?;
    let mut base = q.base;
    let mut angles = q.angles.clone();
    let limits = robot.limits();

    let opts = GnOptions {
        max_iters: 25,
        ..GnOptions::default()
    };
    solve_pose_angles(
        |base, angles, out| {
            let q = crate::kinematics::JointConfig::new(*base, angles.to_vec());
            out.clear();
            match point_cloud_fk(robot, &q, pts) {
                Ok(cloud) => {
                    out.extend(cloud.points.iter().map(|p| posed.signed_distance(p).min(0.0)))
                }
                Err(_) => out.extend(std::iter::repeat(1e6).take(pts.total())),
            }
        },
        &mut base,
        &mut angles,
        &limits,
        &opts,
    );

    let mut corrected = grasp.clone();
    corrected.set_joint_config(&crate::kinematics::JointConfig::new(base, angles));
    corrected.metrics = None;
    corrected.verdict = None;
    Ok(corrected)
}

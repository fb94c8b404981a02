//! Dataset filtering: three gates applied in a fixed order — object size,
//! shape fidelity against a category reference, grasp penetration — with
//! each rejection attributed to the first gate that failed, and a review
//! report describing the retained grasps for human spot checks.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    d2_descriptor, sample_surface, wasserstein_1d, TriMesh, D2_DEFAULT_BINS, D2_RANGE_FACTOR,
};
use crate::kinematics::{LinkPointSet, RobotModel};
use crate::metrics::{quality_report, MetricsConfig};
use crate::pipeline::GraspRecord;
use crate::{Error, Result};

/// Seed for the shape gate's surface sampling and D2 pair draws: fixed so
/// filtering a dataset twice makes identical decisions.
const SHAPE_GATE_SEED: u64 = 0;

/// Thresholds for the three filter gates. A record passes when the measured
/// object diagonal lies inside `[size_min_m, size_max_m]` and every other
/// measurement is at or below its `*_tau_*` bound.
///
/// The defaults are deliberately permissive placeholders; real datasets tune
/// these per object category via [`FilterConfig::overrides`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateThresholds {
    /// Minimum object bounding-box diagonal, meters.
    pub size_min_m: f64,
    /// Maximum object bounding-box diagonal, meters.
    pub size_max_m: f64,
    /// Maximum 1-D Wasserstein distance between the object's and the
    /// reference's D2 shape distributions, meters.
    pub shape_tau_w_m: f64,
    /// Maximum grasp penetration depth, centimeters.
    pub depth_tau_cm: f64,
    /// Maximum grasp penetration volume, cubic centimeters.
    pub volume_tau_cm3: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        GateThresholds {
            size_min_m: 0.04,
            size_max_m: 0.60,
            shape_tau_w_m: 0.01,
            depth_tau_cm: 0.5,
            volume_tau_cm3: 2.0,
        }
    }
}

impl GateThresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("size_min_m", self.size_min_m),
            ("size_max_m", self.size_max_m),
            ("shape_tau_w_m", self.shape_tau_w_m),
            ("depth_tau_cm", self.depth_tau_cm),
            ("volume_tau_cm3", self.volume_tau_cm3),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Invalid(format!(
                    "gate threshold {name} = {value} must be finite and > 0"
                )));
            }
        }
        if self.size_min_m >= self.size_max_m {
            return Err(Error::Invalid(format!(
                "size gate is empty: min {} >= max {}",
                self.size_min_m, self.size_max_m
            )));
        }
        Ok(())
    }
}

/// Configuration for [`filter_dataset`]: default gate thresholds, optional
/// per-category overrides, and the metric thresholds used for the fresh
/// [`crate::metrics::QualityMetrics`] attached to retained records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Thresholds used when a category has no override.
    pub gates: GateThresholds,
    /// Per-category threshold overrides, keyed by `GraspRecord::object_id`.
    pub overrides: BTreeMap<String, GateThresholds>,
    /// Settings for the metrics the penetration gate reads.
    pub metrics: MetricsConfig,
    /// Surface samples per cloud for the shape gate's D2 descriptors.
    pub shape_samples: usize,
    /// Point pairs per D2 descriptor in the shape gate.
    pub shape_pairs: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gates: GateThresholds::default(),
            overrides: BTreeMap::new(),
            metrics: MetricsConfig::default(),
            shape_samples: 1024,
            shape_pairs: 20_000,
        }
    }
}

impl FilterConfig {
    pub fn thresholds_for(&self, category: &str) -> &GateThresholds {
        self.overrides.get(category).unwrap_or(&self.gates)
    }

    pub fn validate(&self) -> Result<()> {
        self.gates.validate()?;
        for (category, gates) in &self.overrides {
            gates.validate().map_err(|e| {
                Error::Invalid(format!("override for category '{category}': {e}"))
            })?;
        }
        if self.shape_samples < 2 {
            return Err(Error::Invalid(format!(
                "shape gate needs >= 2 surface samples, got {}",
                self.shape_samples
            )));
        }
        if self.shape_pairs == 0 {
            return Err(Error::Invalid("shape_pairs must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-gate rejection tally for one [`filter_dataset`] run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    /// Records examined.
    pub input: usize,
    /// Rejected by the size gate.
    pub rejected_size: usize,
    /// Passed size, rejected by the shape gate.
    pub rejected_shape: usize,
    /// Passed size and shape, rejected by the penetration gate.
    pub rejected_penetration: usize,
    /// Records that passed every gate.
    pub retained: usize,
    /// `retained / input`; zero for an empty input.
    pub retained_fraction: f64,
}

impl FilterStats {
    fn tally(input: usize, size: usize, shape: usize, penetration: usize) -> FilterStats {
        let retained = input - size - shape - penetration;
        FilterStats {
            input,
            rejected_size: size,
            rejected_shape: shape,
            rejected_penetration: penetration,
            retained,
            retained_fraction: if input == 0 { 0.0 } else { retained as f64 / input as f64 },
        }
    }

    /// Check the bookkeeping invariants (counts partition the input, the
    /// fraction matches the counts).
    pub fn validate(&self) -> Result<()> {
        let total = self.rejected_size + self.rejected_shape + self.rejected_penetration
            + self.retained;
        if total != self.input {
            return Err(Error::Internal(format!(
                "filter stats do not partition the input: {total} of {}",
                self.input
            )));
        }
        let fraction = if self.input == 0 { 0.0 } else { self.retained as f64 / self.input as f64 };
        if (self.retained_fraction - fraction).abs() > 1e-12 {
            return Err(Error::Internal(format!(
                "retained fraction {} disagrees with counts ({fraction})",
                self.retained_fraction
            )));
        }
        Ok(())
    }

    /// One-line summary, e.g.
    /// `filtered 1000 records: rejected 600 (size), 204 (shape), 100 (penetration); retained 96 (9.6%)`.
    pub fn summary_line(&self) -> String {
        format!(
            "filtered {} records: rejected {} (size), {} (shape), {} (penetration); retained {} ({:.1}%)",
            self.input,
            self.rejected_size,
            self.rejected_shape,
            self.rejected_penetration,
            self.retained,
            100.0 * self.retained_fraction
        )
    }
}

/// One retained grasp in the human-review report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub record_id: String,
    pub object_id: String,
    /// Where the posed-hand OBJ export for this grasp belongs, relative to
    /// wherever the report is written.
    pub export_path: String,
    pub penetration_depth_cm: f64,
    pub contact_ratio: f64,
}

/// Inspection summary for the retained records, in retained order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReviewReport {
    pub entries: Vec<ReviewEntry>,
}

impl ReviewReport {
    /// Plain-text rendering, one retained grasp per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}  object={}  depth={:.3}cm  contact={:.3}  export={}\n",
                e.record_id, e.object_id, e.penetration_depth_cm, e.contact_ratio, e.export_path
            ));
        }
        out
    }
}

/// Applies the three gates to every record, in input order.
///
/// Object meshes are loaded from each record's `object_mesh` path resolved
/// against `mesh_root` (and cached, since records share objects). Every
/// record's `object_id` must have a reference mesh in `references`. Retained
/// records come back with freshly computed metrics attached; the review
/// report lists them with the conventional `review/<id>.obj` export path for
/// the posed-hand meshes.
///
/// Filtering is deterministic and idempotent: running the retained set back
/// through the same configuration retains everything.
pub fn filter_dataset(
    records: &[GraspRecord],
    robot: &RobotModel,
    pts: &LinkPointSet,
    mesh_root: &Path,
    references: &BTreeMap<String, TriMesh>,
    cfg: &FilterConfig,
) -> Result<(Vec<GraspRecord>, FilterStats, ReviewReport)> {
    cfg.validate()?;

    let mut meshes: HashMap<&str, TriMesh> = HashMap::new();
    let mut retained = Vec::new();
    let mut report = ReviewReport::default();
    let (mut size, mut shape, mut penetration) = (0usize, 0usize, 0usize);

    for record in records {
        record.validate_for(robot)?;
        let reference = references.get(&record.object_id).ok_or_else(|| {
            Error::Invalid(format!(
                "record {}: no reference mesh for category '{}'",
                record.id, record.object_id
            ))
        })?;
        let gates = cfg.thresholds_for(&record.object_id);

        let object = match meshes.entry(record.object_mesh.as_str()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(TriMesh::load_obj(&mesh_root.join(&record.object_mesh))?)
            }
        };

        // Gate 1: object size.
        let (lo, hi) = object.aabb();
        let diagonal = (hi - lo).norm();
        if !(diagonal >= gates.size_min_m && diagonal <= gates.size_max_m) {
            size += 1;
            continue;
        }

        // Gate 2: shape fidelity against the category reference.
        let w = shape_distance(object, reference, cfg)?;
        if !(w <= gates.shape_tau_w_m) {
            shape += 1;
            continue;
        }

        // Gate 3: penetration. The full metric set is computed here so the
        // survivors carry it out.
        let metrics = quality_report(record, robot, pts, object, &cfg.metrics)?;
        if !(metrics.penetration_depth_cm <= gates.depth_tau_cm
            && metrics.penetration_volume_cm3 <= gates.volume_tau_cm3)
        {
            penetration += 1;
            continue;
        }

        report.entries.push(ReviewEntry {
            record_id: record.id.clone(),
            object_id: record.object_id.clone(),
            export_path: format!("review/{}.obj", record.id),
            penetration_depth_cm: metrics.penetration_depth_cm,
            contact_ratio: metrics.contact_ratio,
        });
        let mut keep = record.clone();
        keep.metrics = Some(metrics);
        retained.push(keep);
    }

    let stats = FilterStats::tally(records.len(), size, shape, penetration);
    stats.validate()?;
    Ok((retained, stats, report))
}

/// 1-D Wasserstein distance between the D2 shape distributions of two
/// meshes, in meters, over a shared bin range.
fn shape_distance(object: &TriMesh, reference: &TriMesh, cfg: &FilterConfig) -> Result<f64> {
    let diag = |m: &TriMesh| {
        let (lo, hi) = m.aabb();
        (hi - lo).norm()
    };
    let range = D2_RANGE_FACTOR * diag(object).max(diag(reference));
    let a = sample_surface(object, cfg.shape_samples, SHAPE_GATE_SEED)?;
    let b = sample_surface(reference, cfg.shape_samples, SHAPE_GATE_SEED)?;
    let ha = d2_descriptor(&a, cfg.shape_pairs, D2_DEFAULT_BINS, range, SHAPE_GATE_SEED)?;
    let hb = d2_descriptor(&b, cfg.shape_pairs, D2_DEFAULT_BINS, range, SHAPE_GATE_SEED)?;
    wasserstein_1d(&ha, &hb)
}

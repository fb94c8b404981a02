//! Shared argument blocks and input loading.

use std::path::{Path, PathBuf};

use clap::Args;

use graspforge_core::geometry::{sample_surface, PointCloud, TriMesh};
use graspforge_core::io::{read_cloud, read_records, write_records};
use graspforge_core::kinematics::{
    area_proportional_counts, load_robot, sample_link_points, LinkPointSet, RobotModel,
};
use graspforge_core::pipeline::GraspRecord;
use graspforge_core::{Error, Result};

/// Robot description plus the link point-set sampling knobs, shared by
/// every command that runs point-cloud forward kinematics.
#[derive(Args)]
pub struct RobotOpts {
    /// Robot description file (XML).
    #[arg(long)]
    pub robot: PathBuf,
    /// Per-link sample counts `a,b,...`, or one total split by mesh area.
    #[arg(long, default_value = "512")]
    pub counts: String,
    /// Seed for link point sampling.
    #[arg(long, default_value_t = 0)]
    pub point_seed: u64,
}

impl RobotOpts {
    pub fn load(&self) -> Result<(RobotModel, LinkPointSet)> {
        let robot = load_robot(&self.robot)?;
        let counts = parse_counts(&self.counts, &robot)?;
        let pts = sample_link_points(&robot, &counts, self.point_seed)?;
        Ok((robot, pts))
    }
}

/// `"512"` becomes an area-proportional split over the link meshes;
/// `"64,32,..."` gives explicit per-link counts.
pub fn parse_counts(spec: &str, robot: &RobotModel) -> Result<Vec<usize>> {
    if !spec.contains(',') {
        let total = spec.trim().parse::<usize>().map_err(|_| {
            Error::Invalid(format!("--counts must be an integer or a comma list, got {spec:?}"))
        })?;
        let mut areas = Vec::with_capacity(robot.links.len());
        for link in &robot.links {
            areas.push(match &link.mesh {
                Some(path) => TriMesh::load_obj(path)?.total_area(),
                None => 0.0,
            });
        }
        return area_proportional_counts(&areas, total);
    }
    let counts = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Invalid(format!("bad --counts list {spec:?}")))?;
    if counts.len() != robot.links.len() {
        return Err(Error::dim(robot.links.len(), counts.len(), "per-link counts"));
    }
    Ok(counts)
}

/// Loads a point cloud: `.ply` files directly, meshes via surface sampling
/// with `samples` points and `seed`.
pub fn load_cloud(path: &Path, samples: usize, seed: u64) -> Result<PointCloud> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        read_cloud(path)
    } else {
        sample_surface(&TriMesh::load_obj(path)?, samples, seed)
    }
}

/// Reads grasps from a single-record JSON file or a JSON-lines file.
pub fn load_records_flexible(path: &Path) -> Result<Vec<GraspRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(record) = serde_json::from_str::<GraspRecord>(&text) {
        return Ok(vec![record]);
    }
    read_records(path)
}

/// Writes records to `out`: a `.json` extension means one pretty-printed
/// record, anything else JSON-lines.
pub fn write_records_flexible(out: &Path, records: &[GraspRecord]) -> Result<()> {
    if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        if records.len() != 1 {
            return Err(Error::Invalid(format!(
                "a .json output holds exactly one record, have {}; use .jsonl",
                records.len()
            )));
        }
        write_json(out, &records[0])
    } else {
        write_records(out, records)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("value does not serialize: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Parses a repeatable `name=path` argument.
pub fn parse_named_path(spec: &str) -> std::result::Result<(String, PathBuf), String> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected name=path, got {spec:?}")),
    }
}

/// Reads a JSON config file, or returns the default when no path is given.
pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
        }
    }
}

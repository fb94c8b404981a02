//! Posed-hand mesh export for visual inspection.
//!
//! Merges every link's collision mesh, transformed by the link's forward
//! kinematics, into one triangle mesh and writes it as OBJ. The merged mesh
//! passes full [`TriMesh`] validation, so exports always re-import.

use std::path::Path;

use crate::geometry::TriMesh;
use crate::kinematics::{forward_kinematics, JointConfig, RobotModel};
use crate::{Error, Result};

/// All link meshes of `robot`, posed by the forward kinematics of `q` and
/// merged into a single mesh. Links without a mesh contribute nothing; a
/// robot with no meshes at all is an error.
pub fn posed_hand_mesh(robot: &RobotModel, q: &JointConfig) -> Result<TriMesh> {
    let poses = forward_kinematics(robot, q)?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (link, pose) in robot.links.iter().zip(&poses) {
        let Some(path) = &link.mesh else { continue };
        let mesh = TriMesh::load_obj(path)?;
        let base = vertices.len();
        vertices.extend(mesh.vertices().iter().map(|v| pose * v));
        triangles.extend(mesh.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    if triangles.is_empty() {
        return Err(Error::Robot(format!(
            "robot '{}' has no link meshes to export",
            robot.name
        )));
    }
    TriMesh::new(vertices, triangles)
}

/// Writes the posed hand of [`posed_hand_mesh`] as an ASCII OBJ file.
pub fn export_posed_hand(path: &Path, robot: &RobotModel, q: &JointConfig) -> Result<()> {
    posed_hand_mesh(robot, q)?.save_obj(path)
}

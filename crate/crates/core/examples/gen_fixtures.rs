//! Regenerates the checked-in `fixtures/` tree: the toy five-finger hand
//! (robot description + meshes), a few graspable objects, and the human-hand
//! keypoint mapping used by the retargeting tests and CLI examples.
//!
//! Run from anywhere in the workspace:
//!
//! ```text
//! cargo run -p graspforge-core --example gen_fixtures
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Point3, Vector3};

use graspforge_core::shapes::{box_mesh, icosphere};
use graspforge_core::Result;

/// Palm half-extents (meters).
const PALM: [f64; 3] = [0.04, 0.05, 0.01];
/// Phalanx box length along +x and half-extents in y/z.
const PHALANX_LEN: f64 = 0.03;
const PHALANX_HALF: f64 = 0.008;
/// Knuckle y positions across the palm edge.
const KNUCKLE_Y: [f64; 5] = [-0.04, -0.02, 0.0, 0.02, 0.04];
/// Joint limits shared by all finger joints (radians).
const LIMITS: (f64, f64) = (-0.2, 1.6);

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn write_meshes(root: &Path) -> Result<()> {
    let mesh_dir = root.join("toy_hand/meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(|e| graspforge_core::Error::io(&mesh_dir, e))?;

    let palm = box_mesh(2.0 * PALM[0], 2.0 * PALM[1], 2.0 * PALM[2]);
    palm.save_obj(&mesh_dir.join("palm.obj"))?;

    // Phalanx box spans [0, PHALANX_LEN] along x so the link frame sits at
    // its driving joint.
    let shift = Isometry3::translation(PHALANX_LEN / 2.0, 0.0, 0.0);
    let phalanx =
        box_mesh(PHALANX_LEN, 2.0 * PHALANX_HALF, 2.0 * PHALANX_HALF).transformed(&shift);
    phalanx.save_obj(&mesh_dir.join("phalanx.obj"))?;

    let obj_dir = root.join("objects");
    std::fs::create_dir_all(&obj_dir).map_err(|e| graspforge_core::Error::io(&obj_dir, e))?;

    icosphere(3, 0.03).save_obj(&obj_dir.join("sphere.obj"))?;
    box_mesh(0.05, 0.04, 0.03).save_obj(&obj_dir.join("box.obj"))?;

    // Ellipsoid: scale a unit icosphere anisotropically.
    let ball = icosphere(3, 1.0);
    let radii = Vector3::new(0.04, 0.025, 0.025);
    let vertices: Vec<Point3<f64>> = ball
        .vertices()
        .iter()
        .map(|v| Point3::new(v.x * radii.x, v.y * radii.y, v.z * radii.z))
        .collect();
    let ellipsoid = graspforge_core::geometry::TriMesh::new(vertices, ball.triangles().to_vec())?;
    ellipsoid.save_obj(&obj_dir.join("ellipsoid.obj"))?;

    Ok(())
}

fn hand_xml() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<robot name=\"toy_hand\">");
    let _ = writeln!(s, "  <link name=\"palm\">");
    let _ = writeln!(s, "    <collision>");
    let _ = writeln!(s, "      <geometry>");
    let _ = writeln!(s, "        <mesh filename=\"meshes/palm.obj\"/>");
    let _ = writeln!(s, "      </geometry>");
    let _ = writeln!(s, "    </collision>");
    let _ = writeln!(s, "  </link>");
    for f in 0..5 {
        for seg in ["prox", "dist"] {
            let _ = writeln!(s, "  <link name=\"finger{f}_{seg}\">");
            let _ = writeln!(s, "    <collision>");
            let _ = writeln!(s, "      <geometry>");
            let _ = writeln!(s, "        <mesh filename=\"meshes/phalanx.obj\"/>");
            let _ = writeln!(s, "      </geometry>");
            let _ = writeln!(s, "    </collision>");
            let _ = writeln!(s, "  </link>");
        }
    }
    for (f, y) in KNUCKLE_Y.iter().enumerate() {
        let _ = writeln!(s, "  <joint name=\"finger{f}_mcp\" type=\"revolute\">");
        let _ = writeln!(s, "    <origin xyz=\"{} {} 0\" rpy=\"0 0 0\"/>", PALM[0], y);
        let _ = writeln!(s, "    <parent link=\"palm\"/>");
        let _ = writeln!(s, "    <child link=\"finger{f}_prox\"/>");
        let _ = writeln!(s, "    <axis xyz=\"0 1 0\"/>");
        let _ = writeln!(
            s,
            "    <limit lower=\"{}\" upper=\"{}\"/>",
            LIMITS.0, LIMITS.1
        );
        let _ = writeln!(s, "  </joint>");
        let _ = writeln!(s, "  <joint name=\"finger{f}_pip\" type=\"revolute\">");
        let _ = writeln!(s, "    <origin xyz=\"{PHALANX_LEN} 0 0\" rpy=\"0 0 0\"/>");
        let _ = writeln!(s, "    <parent link=\"finger{f}_prox\"/>");
        let _ = writeln!(s, "    <child link=\"finger{f}_dist\"/>");
        let _ = writeln!(s, "    <axis xyz=\"0 1 0\"/>");
        let _ = writeln!(
            s,
            "    <limit lower=\"{}\" upper=\"{}\"/>",
            LIMITS.0, LIMITS.1
        );
        let _ = writeln!(s, "  </joint>");
    }
    let _ = writeln!(s, "  <keypoint name=\"palm\" link=\"palm\" xyz=\"0 0 0\"/>");
    for f in 0..5 {
        let _ = writeln!(
            s,
            "  <keypoint name=\"mid_{f}\" link=\"finger{f}_prox\" xyz=\"{PHALANX_LEN} 0 0\"/>"
        );
        let _ = writeln!(
            s,
            "  <keypoint name=\"tip_{f}\" link=\"finger{f}_dist\" xyz=\"{PHALANX_LEN} 0 0\"/>"
        );
    }
    let _ = writeln!(s, "</robot>");
    s
}

/// Keypoint-pair mapping from the 21-point human hand layout (wrist = 0,
/// then MCP/PIP/DIP/TIP per finger) onto the toy hand's named keypoints.
fn mapping_json() -> String {
    let mut pairs = Vec::new();
    pairs.push(("palm".to_string(), 0usize, 1.0));
    for f in 0..5 {
        pairs.push((format!("mid_{f}"), 2 + 4 * f, 1.0));
        pairs.push((format!("tip_{f}"), 4 + 4 * f, 2.0));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{{");
    let _ = writeln!(s, "  \"scale\": 1.0,");
    let _ = writeln!(s, "  \"rest_weight\": 0.01,");
    let _ = writeln!(s, "  \"pairs\": [");
    for (i, (name, idx, w)) in pairs.iter().enumerate() {
        let comma = if i + 1 == pairs.len() { "" } else { "," };
        let _ = writeln!(
            s,
            "    {{\"robot_keypoint\": \"{name}\", \"human_index\": {idx}, \"weight\": {w:.1}}}{comma}"
        );
    }
    let _ = writeln!(s, "  ]");
    let _ = writeln!(s, "}}");
    s
}

fn main() -> Result<()> {
    let root = fixtures_root();
    write_meshes(&root)?;

    let xml_path = root.join("toy_hand/hand.xml");
    std::fs::write(&xml_path, hand_xml()).map_err(|e| graspforge_core::Error::io(&xml_path, e))?;

    let map_dir = root.join("retarget");
    std::fs::create_dir_all(&map_dir).map_err(|e| graspforge_core::Error::io(&map_dir, e))?;
    let map_path = map_dir.join("mano_mapping.json");
    std::fs::write(&map_path, mapping_json())
        .map_err(|e| graspforge_core::Error::io(&map_path, e))?;

    // Parse back what we wrote as a self-check.
    let robot = graspforge_core::kinematics::load_robot(&xml_path)?;
    assert_eq!(robot.dof(), 10);
    assert_eq!(robot.keypoints.len(), 11);
    println!("fixtures written to {}", root.display());
    Ok(())
}

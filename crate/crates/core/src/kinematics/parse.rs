//! Robot description parsing.
//!
//! The accepted format is a strict subset of the common XML robot
//! description: `<robot>` containing `<link>` (optionally with
//! `<collision><geometry><mesh filename=…/>`), `<joint type=…>` with
//! `<origin>`, `<parent>`, `<child>`, `<axis>`, `<limit>`, and a
//! `<keypoint name=… link=… xyz=…/>` extension element for retargeting
//! anchors. Anything outside the subset — unknown elements, unknown
//! attributes, unsupported joint types — is rejected loudly rather than
//! ignored, so description files stay honest about what the loader uses.

use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use roxmltree::{Document, Node};

use crate::error::{Error, Result};
use crate::kinematics::model::{Joint, JointType, Keypoint, Link, RobotModel};

/// Loads and parses a robot description file; mesh references resolve
/// against the file's directory.
pub fn load_robot(path: &Path) -> Result<RobotModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_robot(&text, base).map_err(|e| match e {
        // Attach the file name to position-less parse errors.
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        other => other,
    })
}

/// Parses a robot description from text. `base_dir` anchors relative mesh
/// filenames.
pub fn parse_robot(text: &str, base_dir: &Path) -> Result<RobotModel> {
    let doc = Document::parse(text).map_err(|e| {
        Error::parse(Path::new("<robot>"), e.pos().row as usize, e.to_string())
    })?;
    let ctx = Ctx { doc: &doc };

    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(ctx.err(&root, format!("expected <robot>, found <{}>", root.tag_name().name())));
    }
    ctx.check_attrs(&root, &["name"])?;
    let name = root.attribute("name").unwrap_or("robot").to_string();

    let mut link_names: Vec<String> = Vec::new();
    let mut links: Vec<Link> = Vec::new();
    let mut raw_joints: Vec<(Node, String)> = Vec::new();
    let mut raw_keypoints: Vec<Node> = Vec::new();

    for child in root.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "link" => {
                ctx.check_attrs(&child, &["name"])?;
                let lname = ctx.require_attr(&child, "name")?.to_string();
                let mesh = parse_link_mesh(&ctx, &child, base_dir)?;
                link_names.push(lname.clone());
                links.push(Link {
                    name: lname,
                    mesh,
                    parent_joint: None,
                });
            }
            "joint" => {
                ctx.check_attrs(&child, &["name", "type"])?;
                let jname = ctx.require_attr(&child, "name")?.to_string();
                raw_joints.push((child, jname));
            }
            "keypoint" => {
                ctx.check_attrs(&child, &["name", "link", "xyz"])?;
                raw_keypoints.push(child);
            }
            other => {
                return Err(ctx.err(&child, format!("unsupported element <{other}>")));
            }
        }
    }

    let link_index = |ctx: &Ctx, node: &Node, name: &str| -> Result<usize> {
        link_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ctx.err(node, format!("unknown link {name:?}")))
    };

    let mut joints = Vec::with_capacity(raw_joints.len());
    for (node, jname) in &raw_joints {
        let jtype = match ctx.require_attr(node, "type")? {
            "revolute" => JointType::Revolute,
            "prismatic" => JointType::Prismatic,
            "fixed" => JointType::Fixed,
            other => {
                return Err(ctx.err(node, format!("unsupported joint type {other:?}")));
            }
        };
        let mut origin = Isometry3::identity();
        let mut parent = None;
        let mut child_link = None;
        let mut axis = None;
        let mut limits = None;
        for sub in node.children().filter(Node::is_element) {
            match sub.tag_name().name() {
                "origin" => {
                    ctx.check_attrs(&sub, &["xyz", "rpy"])?;
                    let xyz = parse_vec3_attr(&ctx, &sub, "xyz")?.unwrap_or_else(Vector3::zeros);
                    let rpy = parse_vec3_attr(&ctx, &sub, "rpy")?.unwrap_or_else(Vector3::zeros);
                    origin = Isometry3::from_parts(
                        Translation3::from(xyz),
                        rpy_quaternion(rpy),
                    );
                }
                "parent" => {
                    ctx.check_attrs(&sub, &["link"])?;
                    parent = Some(link_index(&ctx, &sub, ctx.require_attr(&sub, "link")?)?);
                }
                "child" => {
                    ctx.check_attrs(&sub, &["link"])?;
                    child_link = Some(link_index(&ctx, &sub, ctx.require_attr(&sub, "link")?)?);
                }
                "axis" => {
                    ctx.check_attrs(&sub, &["xyz"])?;
                    axis = Some(
                        parse_vec3_attr(&ctx, &sub, "xyz")?
                            .ok_or_else(|| ctx.err(&sub, "axis needs an xyz attribute"))?,
                    );
                }
                "limit" => {
                    ctx.check_attrs(&sub, &["lower", "upper"])?;
                    let lo = parse_real_attr(&ctx, &sub, "lower")?;
                    let hi = parse_real_attr(&ctx, &sub, "upper")?;
                    limits = Some((lo, hi));
                }
                other => {
                    return Err(ctx.err(&sub, format!("unsupported joint element <{other}>")));
                }
            }
        }
        let parent =
            parent.ok_or_else(|| ctx.err(node, format!("joint {jname:?} missing <parent>")))?;
        let child_link =
            child_link.ok_or_else(|| ctx.err(node, format!("joint {jname:?} missing <child>")))?;
        let (axis, limits) = match jtype {
            JointType::Fixed => {
                if axis.is_some() || limits.is_some() {
                    return Err(ctx.err(
                        node,
                        format!("fixed joint {jname:?} must not declare axis or limits"),
                    ));
                }
                (Vector3::zeros(), (0.0, 0.0))
            }
            JointType::Revolute | JointType::Prismatic => {
                let axis = axis.ok_or_else(|| {
                    ctx.err(node, format!("joint {jname:?} missing <axis>"))
                })?;
                let limits = limits.ok_or_else(|| {
                    ctx.err(node, format!("joint {jname:?} missing <limit>"))
                })?;
                (axis, limits)
            }
        };
        joints.push(Joint {
            name: jname.clone(),
            joint_type: jtype,
            parent,
            child: child_link,
            origin,
            axis,
            limits,
        });
    }

    let mut keypoints = Vec::with_capacity(raw_keypoints.len());
    for node in &raw_keypoints {
        let label = ctx.require_attr(node, "name")?.to_string();
        let link = link_index(&ctx, node, ctx.require_attr(node, "link")?)?;
        let offset = parse_vec3_attr(&ctx, node, "xyz")?
            .ok_or_else(|| ctx.err(node, "keypoint needs an xyz attribute"))?;
        keypoints.push(Keypoint {
            link,
            offset,
            label,
        });
    }

    RobotModel::new(name, links, joints, keypoints)
}

struct Ctx<'a> {
    doc: &'a Document<'a>,
}

impl Ctx<'_> {
    fn line(&self, node: &Node) -> usize {
        self.doc.text_pos_at(node.range().start).row as usize
    }

    fn err(&self, node: &Node, message: impl Into<String>) -> Error {
        Error::parse(Path::new("<robot>"), self.line(node), message)
    }

    fn require_attr<'a>(&self, node: &'a Node, name: &str) -> Result<&'a str> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("<{}> missing attribute {name:?}", node.tag_name().name())))
    }

    /// Rejects attributes outside the supported subset.
    fn check_attrs(&self, node: &Node, allowed: &[&str]) -> Result<()> {
        for attr in node.attributes() {
            if !allowed.contains(&attr.name()) {
                return Err(self.err(
                    node,
                    format!(
                        "unsupported attribute {:?} on <{}>",
                        attr.name(),
                        node.tag_name().name()
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn parse_link_mesh(ctx: &Ctx, link: &Node, base_dir: &Path) -> Result<Option<PathBuf>> {
    let mut mesh = None;
    for sub in link.children().filter(Node::is_element) {
        if sub.tag_name().name() != "collision" {
            return Err(ctx.err(
                &sub,
                format!("unsupported link element <{}>", sub.tag_name().name()),
            ));
        }
        ctx.check_attrs(&sub, &[])?;
        for geo in sub.children().filter(Node::is_element) {
            if geo.tag_name().name() != "geometry" {
                return Err(ctx.err(
                    &geo,
                    format!("unsupported collision element <{}>", geo.tag_name().name()),
                ));
            }
            ctx.check_attrs(&geo, &[])?;
            for m in geo.children().filter(Node::is_element) {
                if m.tag_name().name() != "mesh" {
                    return Err(ctx.err(
                        &m,
                        format!("unsupported geometry element <{}>", m.tag_name().name()),
                    ));
                }
                ctx.check_attrs(&m, &["filename"])?;
                let file = ctx.require_attr(&m, "filename")?;
                mesh = Some(base_dir.join(file));
            }
        }
    }
    Ok(mesh)
}

fn parse_vec3_attr(ctx: &Ctx, node: &Node, name: &str) -> Result<Option<Vector3<f64>>> {
    let Some(text) = node.attribute(name) else {
        return Ok(None);
    };
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(ctx.err(node, format!("{name}=\"{text}\" must have 3 components")));
    }
    let mut v = Vector3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .parse()
            .map_err(|_| ctx.err(node, format!("bad number {p:?} in {name}")))?;
    }
    Ok(Some(v))
}

fn parse_real_attr(ctx: &Ctx, node: &Node, name: &str) -> Result<f64> {
    let text = ctx.require_attr(node, name)?;
    text.parse()
        .map_err(|_| ctx.err(node, format!("bad number {text:?} in {name}")))
}

/// Fixed-axis roll-pitch-yaw to quaternion: `Rz(yaw) · Ry(pitch) · Rx(roll)`.
fn rpy_quaternion(rpy: Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TWO_LINK: &str = r#"
<robot name="arm">
  <link name="base"/>
  <link name="forearm"/>
  <joint name="elbow" type="revolute">
    <origin xyz="0.1 0 0" rpy="0 0 0"/>
    <parent link="base"/>
    <child link="forearm"/>
    <axis xyz="0 0 1"/>
    <limit lower="-1.5" upper="1.5"/>
  </joint>
  <keypoint name="tip" link="forearm" xyz="0.2 0 0"/>
</robot>
"#;

    #[test]
    fn parses_two_link_arm() {
        let model = parse_robot(TWO_LINK, Path::new(".")).unwrap();
        assert_eq!(model.name, "arm");
        assert_eq!(model.links.len(), 2);
        assert_eq!(model.dof(), 1);
        assert_eq!(model.keypoints.len(), 1);
        assert_eq!(model.keypoints[0].label, "tip");
        let j = &model.joints[0];
        assert_relative_eq!(j.origin.translation.x, 0.1, epsilon = 1e-15);
        assert_eq!(j.limits, (-1.5, 1.5));
    }

    #[test]
    fn unsupported_element_rejected() {
        let text = TWO_LINK.replace("<keypoint", "<transmission foo=\"1\"/><keypoint");
        let err = parse_robot(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("transmission"), "{err}");
    }

    #[test]
    fn unsupported_attribute_rejected() {
        let text = TWO_LINK.replace("type=\"revolute\"", "type=\"revolute\" damping=\"0.5\"");
        let err = parse_robot(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("damping"), "{err}");
    }

    #[test]
    fn unknown_child_link_rejected() {
        let text = TWO_LINK.replace("child link=\"forearm\"", "child link=\"wrist\"");
        let err = parse_robot(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("wrist"), "{err}");
    }

    #[test]
    fn continuous_joint_rejected() {
        let text = TWO_LINK.replace("type=\"revolute\"", "type=\"continuous\"");
        assert!(parse_robot(&text, Path::new(".")).is_err());
    }

    #[test]
    fn rpy_convention_matches_fixed_axis_composition() {
        // roll π/2 about x, then pitch π/2 about (fixed) y.
        let q = rpy_quaternion(Vector3::new(
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            0.0,
        ));
        let expected = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        assert!(q.rotation_to(&expected).angle() < 1e-12);
    }

    #[test]
    fn mesh_path_resolved_against_base_dir() {
        let text = r#"
<robot name="r">
  <link name="only">
    <collision><geometry><mesh filename="meshes/body.obj"/></geometry></collision>
  </link>
</robot>
"#;
        let model = parse_robot(text, Path::new("/data/robots")).unwrap();
        assert_eq!(
            model.links[0].mesh.as_deref(),
            Some(Path::new("/data/robots/meshes/body.obj"))
        );
    }
}

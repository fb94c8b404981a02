//! `graspforge robot info|sample`.

use std::path::PathBuf;

use clap::Subcommand;

use graspforge_core::io::write_cloud;
use graspforge_core::kinematics::{
    load_robot, point_cloud_fk, sample_link_points, JointType, RobotModel,
};
use graspforge_core::Result;

use super::common::parse_counts;

#[derive(Subcommand)]
pub enum Robot {
    /// Print a structural summary of a robot description.
    Info {
        /// Robot description file (XML).
        file: PathBuf,
    },
    /// Sample per-link surface points and write the rest-pose cloud as PLY
    /// with per-point link labels.
    Sample {
        /// Robot description file (XML).
        file: PathBuf,
        /// Per-link sample counts `a,b,...`, or one total split by mesh area.
        #[arg(long, default_value = "512")]
        counts: String,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output PLY path.
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cmd: Robot) -> Result<()> {
    match cmd {
        Robot::Info { file } => {
            let robot = load_robot(&file)?;
            print!("{}", describe(&robot));
            Ok(())
        }
        Robot::Sample { file, counts, seed, out } => {
            let robot = load_robot(&file)?;
            let counts = parse_counts(&counts, &robot)?;
            let pts = sample_link_points(&robot, &counts, seed)?;
            let cloud = point_cloud_fk(&robot, &robot.rest_config(), &pts)?;
            write_cloud(&out, &cloud)?;
            println!(
                "wrote {} points over {} links to {}",
                cloud.len(),
                robot.links.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn describe(robot: &RobotModel) -> String {
    let mut out = format!(
        "robot {}: {} links, {} joints ({} actuated), {} keypoints\n",
        robot.name,
        robot.links.len(),
        robot.joints.len(),
        robot.dof(),
        robot.keypoints.len()
    );
    out.push_str("links:\n");
    for (i, link) in robot.links.iter().enumerate() {
        let mesh = match &link.mesh {
            Some(path) => path.display().to_string(),
            None => "-".to_string(),
        };
        let root = if i == robot.root { "  (root)" } else { "" };
        out.push_str(&format!("  {}  mesh={mesh}{root}\n", link.name));
    }
    out.push_str("joints:\n");
    for joint in &robot.joints {
        let kind = match joint.joint_type {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        };
        let limits = match joint.joint_type {
            JointType::Fixed => String::new(),
            _ => format!("  limits [{}, {}]", joint.limits.0, joint.limits.1),
        };
        out.push_str(&format!(
            "  {}  {kind}  {} -> {}{limits}\n",
            joint.name, robot.links[joint.parent].name, robot.links[joint.child].name
        ));
    }
    for kp in &robot.keypoints {
        out.push_str(&format!("keypoint {} on {}\n", kp.label, robot.links[kp.link].name));
    }
    out
}

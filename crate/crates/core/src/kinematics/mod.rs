//! Robot kinematics: description parsing, forward kinematics, per-link
//! surface sampling, and the point-cloud FK map that poses those samples.

mod fk;
mod model;
mod parse;

pub use fk::{
    clamp_to_limits, forward_kinematics, keypoint_fk, point_cloud_fk, sample_link_points,
};
pub use model::{
    area_proportional_counts, Joint, JointConfig, JointType, Keypoint, Link, LinkPointSet,
    RobotModel,
};
pub use parse::{load_robot, parse_robot};

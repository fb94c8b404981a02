//! Core library for `graspforge`: turning noisy hand-object interaction
//! grasps into retargeted, aligned, quality-scored robot grasp records, and
//! encoding/decoding grasps through a dense robot-to-object distance matrix
//! with multilateration-based recovery.
//!
//! The main subsystems:
//!
//! - [`kinematics`]: robot description parsing, forward kinematics, and the
//!   point-cloud FK map that poses per-link surface samples.
//! - [`geometry`]: triangle meshes, signed distances, surface sampling, ICP
//!   registration, D2 shape descriptors, and 1-D Wasserstein distances.
//! - [`retarget`]: human-hand keypoints to robot joint configurations via
//!   position-based optimization.
//! - [`dro`]: the distance-matrix grasp codec (encode, multilaterate, fit).
//! - [`metrics`]: penetration, disjoint-distance, and contact-ratio grasp
//!   quality metrics.
//! - [`eval`]: contact extraction and force-closure grasp evaluation.
//! - [`pipeline`]: object alignment, dataset filtering gates, the retrieval
//!   predictor, and the augmentation accumulation loop.
//! - [`io`]: record/matrix/mesh/cloud serialization and report rendering.
//!
//! All lengths are meters internally; metric reports convert to cm/cm³.

pub mod error;
pub mod math;

pub mod geometry;
pub mod kinematics;

pub mod optim;

pub mod dro;
pub mod eval;
pub mod metrics;
pub mod retarget;

pub mod pipeline;

pub mod io;

pub mod shapes;

pub use error::{Error, ErrorKind, Result};

//! Mesh and point-cloud geometry: surface sampling, signed distance,
//! ICP registration, D2 shape descriptors, and 1-D Wasserstein distance.

mod accel;
mod cloud;
mod d2;
mod icp;
mod mesh;
mod sample;

pub use accel::KdTree3;
pub use cloud::PointCloud;
pub use d2::{
    d2_descriptor, d2_descriptor_exhaustive, total_variation, wasserstein_1d, D2Histogram,
    D2_DEFAULT_BINS, D2_DEFAULT_PAIRS, D2_RANGE_FACTOR,
};
pub use icp::{icp_align, IcpOptions, IcpResult, IcpTarget, SimilarityTransform};
pub use mesh::TriMesh;
pub use sample::{sample_surface, sample_surface_with};

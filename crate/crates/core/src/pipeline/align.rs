//! Registration of reconstructed objects against category reference meshes.
//!
//! Reconstructions arrive as point clouds in the grasp frame; the dataset
//! wants the reference mesh posed in that frame instead. [`align_object`]
//! registers the cloud onto the reference surface with ICP and returns the
//! inverse map, optionally composed with a per-category uniform scale for
//! hands that grasp proportionally enlarged objects.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{icp_align, IcpOptions, IcpTarget, PointCloud, SimilarityTransform, TriMesh};
use crate::{Error, Result};

/// Options for [`align_object`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignOptions {
    /// ICP settings for the registration itself.
    pub icp: IcpOptions,
    /// Uniform scale applied to the reference mesh before registration, so
    /// oversized hands can grasp a proportionally enlarged object. The
    /// returned transform carries the *unscaled* reference into the grasp
    /// frame, i.e. its scale includes this factor.
    pub category_scale: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            icp: IcpOptions::default(),
            category_scale: 1.0,
        }
    }
}

/// Registers a reconstructed object cloud against its category reference
/// mesh and returns the reference-mesh pose in the grasp frame plus the
/// trimmed RMS registration residual (meters).
///
/// ICP runs from the reconstruction onto the (scaled) reference surface —
/// the robust direction, since every reconstructed point has a true
/// counterpart on the full mesh even when coverage is partial — and the
/// result is inverted before being returned.
pub fn align_object(
    reconstructed: &PointCloud,
    reference: &TriMesh,
    opts: &AlignOptions,
) -> Result<(SimilarityTransform, f64)> {
    if !(opts.category_scale.is_finite() && opts.category_scale > 0.0) {
        return Err(Error::Invalid(format!(
            "category_scale must be finite and > 0, got {}",
            opts.category_scale
        )));
    }

    let scaled;
    let target = if opts.category_scale == 1.0 {
        reference
    } else {
        scaled = scale_mesh(reference, opts.category_scale)?;
        &scaled
    };
    let result = icp_align(reconstructed, IcpTarget::Mesh(target), &opts.icp)?;

    // Forward map F: grasp frame → scaled reference, F(p) = s·(R p) + t.
    // The reference pose is F⁻¹ composed with the category scale c:
    // x ↦ F⁻¹(c·x) = (c/s)·(R⁻¹ x) − (1/s)·(R⁻¹ t).
    let f = result.transform;
    let rotation = f.rotation.inverse();
    let pose = SimilarityTransform {
        rotation,
        translation: -(rotation * f.translation) / f.scale,
        scale: opts.category_scale / f.scale,
    };
    Ok((pose, result.rms))
}

/// Uniformly scale a mesh about the origin.
fn scale_mesh(mesh: &TriMesh, scale: f64) -> Result<TriMesh> {
    let vertices: Vec<Point3<f64>> =
        mesh.vertices().iter().map(|v| Point3::from(v.coords * scale)).collect();
    TriMesh::new(vertices, mesh.triangles().to_vec())
}

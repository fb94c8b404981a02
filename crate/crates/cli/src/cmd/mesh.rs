//! `graspforge mesh sample|sdf|icp|d2`.

use std::path::PathBuf;

use clap::Subcommand;

use graspforge_core::geometry::{
    d2_descriptor, icp_align, wasserstein_1d, IcpOptions, IcpTarget, TriMesh, D2_DEFAULT_BINS,
    D2_DEFAULT_PAIRS, D2_RANGE_FACTOR,
};
use graspforge_core::io::write_cloud;
use graspforge_core::math::bbox_diagonal;
use graspforge_core::{Error, Result};

use super::common::load_cloud;

#[derive(Subcommand)]
pub enum Mesh {
    /// Sample points uniformly by area from a mesh surface.
    Sample {
        /// Mesh file (OBJ).
        mesh: PathBuf,
        /// Number of samples.
        #[arg(long, default_value_t = 1024)]
        count: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output PLY path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Signed distances from query points to a watertight mesh
    /// (negative inside).
    Sdf {
        /// Mesh file (OBJ).
        mesh: PathBuf,
        /// Query cloud: a PLY file, or a mesh sampled with --samples/--seed.
        #[arg(long)]
        cloud: PathBuf,
        /// Samples when --cloud is a mesh.
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        /// Sampling seed when --cloud is a mesh.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `x y z sdf` lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Register a source cloud/mesh onto a target cloud/mesh.
    Icp {
        /// Source: PLY cloud, or a mesh sampled with --samples/--seed.
        source: PathBuf,
        /// Target: PLY cloud (nearest-neighbor) or mesh (closest-point).
        target: PathBuf,
        /// Also estimate a uniform scale.
        #[arg(long)]
        estimate_scale: bool,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Stop once the trimmed RMS improves by less than this (meters).
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Fraction of worst correspondences excluded from each fit.
        #[arg(long, default_value_t = 0.1)]
        trim_fraction: f64,
        /// Samples when source is a mesh.
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        /// Sampling seed when source is a mesh.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the transform JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// D2 shape distribution of one shape, or the 1-D Wasserstein distance
    /// between two.
    D2 {
        /// Shape: PLY cloud or mesh (sampled with --samples/--seed).
        shape: PathBuf,
        /// Second shape: emit the Wasserstein distance instead of the
        /// histogram.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = D2_DEFAULT_PAIRS)]
        pairs: usize,
        #[arg(long, default_value_t = D2_DEFAULT_BINS)]
        bins: usize,
        /// Histogram range in meters; default 1.25 x the largest bounding
        /// box diagonal.
        #[arg(long)]
        range: Option<f64>,
        /// Pair-sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per mesh input.
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cmd: Mesh) -> Result<()> {
    match cmd {
        Mesh::Sample { mesh, count, seed, out } => {
            let cloud = load_cloud(&mesh, count, seed)?;
            write_cloud(&out, &cloud)?;
            println!("wrote {} points to {}", cloud.len(), out.display());
            Ok(())
        }
        Mesh::Sdf { mesh, cloud, samples, seed, out } => {
            let mesh = TriMesh::load_obj(&mesh)?;
            let queries = load_cloud(&cloud, samples, seed)?;
            let mut text = String::new();
            for p in &queries.points {
                text.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, mesh.signed_distance(p)));
            }
            emit(out.as_ref(), &text)
        }
        Mesh::Icp {
            source,
            target,
            estimate_scale,
            max_iters,
            tol,
            trim_fraction,
            samples,
            seed,
            out,
        } => {
            let source = load_cloud(&source, samples, seed)?;
            let opts = IcpOptions { estimate_scale, max_iters, tol, trim_fraction };
            let is_ply =
                target.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
            let result = if is_ply {
                let cloud = load_cloud(&target, samples, seed)?;
                icp_align(&source, IcpTarget::Cloud(&cloud), &opts)?
            } else {
                let mesh = TriMesh::load_obj(&target)?;
                icp_align(&source, IcpTarget::Mesh(&mesh), &opts)?
            };
            let t = &result.transform;
            let q = t.rotation.quaternion();
            let report = serde_json::json!({
                "rotation": [q.w, q.i, q.j, q.k],
                "translation": [t.translation.x, t.translation.y, t.translation.z],
                "scale": t.scale,
                "rms": result.rms,
                "iterations": result.iterations,
            });
            emit(out.as_ref(), &format!("{report:#}\n"))
        }
        Mesh::D2 { shape, compare, pairs, bins, range, seed, samples, out } => {
            let a = load_cloud(&shape, samples, seed)?;
            let b = compare.as_ref().map(|p| load_cloud(p, samples, seed)).transpose()?;
            let range = range.unwrap_or_else(|| {
                let mut diag = bbox_diagonal(&a.points);
                if let Some(b) = &b {
                    diag = diag.max(bbox_diagonal(&b.points));
                }
                D2_RANGE_FACTOR * diag
            });
            let ha = d2_descriptor(&a, pairs, bins, range, seed)?;
            match b {
                None => {
                    let text = serde_json::to_string_pretty(&ha)
                        .map_err(|e| Error::Internal(format!("histogram does not serialize: {e}")))?;
                    emit(out.as_ref(), &format!("{text}\n"))
                }
                Some(b) => {
                    let hb = d2_descriptor(&b, pairs, bins, range, seed)?;
                    let w = wasserstein_1d(&ha, &hb)?;
                    emit(out.as_ref(), &format!("{w}\n"))
                }
            }
        }
    }
}

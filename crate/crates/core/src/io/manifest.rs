//! Dataset manifests: the reproducibility envelope around a grasp dataset.
//!
//! A manifest pins everything a dataset depends on — the robot description,
//! the link point-set sampling parameters, the per-category reference
//! meshes, the config snapshots the records were produced with, and the
//! record files themselves. Every referenced file carries an FNV-1a content
//! hash; [`DatasetManifest::load`] re-hashes each file and refuses to
//! proceed on a mismatch. FNV-1a folds each byte through an xor and an odd
//! multiply (a bijection of the running state), so any single-byte change
//! in a referenced file changes its hash and is caught.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::EvalConfig;
use crate::math::fnv1a64;
use crate::pipeline::{FilterConfig, PerturbConfig};
use crate::{Error, Result};

/// FNV-1a hash of a file's bytes.
pub fn hash_file(path: &Path) -> Result<u64> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(fnv1a64(&bytes))
}

/// A referenced file: a path relative to the manifest plus a content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Path relative to the manifest file's directory.
    pub path: String,
    /// FNV-1a hash of the file bytes.
    pub hash: u64,
}

impl ManifestFile {
    /// Hashes `rel` (resolved against `root`) into a manifest entry.
    pub fn capture(root: &Path, rel: impl Into<String>) -> Result<ManifestFile> {
        let rel = rel.into();
        let hash = hash_file(&root.join(&rel))?;
        Ok(ManifestFile { path: rel, hash })
    }

    fn verify(&self, root: &Path, what: &str) -> Result<()> {
        let computed = hash_file(&root.join(&self.path))?;
        if computed != self.hash {
            return Err(Error::HashMismatch {
                what: format!("{what} {}", self.path),
                stored: self.hash,
                computed,
            });
        }
        Ok(())
    }
}

/// Everything needed to reproduce or audit a dataset, with content hashes
/// binding the manifest to the exact files it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Robot description the records' configurations index into.
    pub robot: ManifestFile,
    /// Seed the link point set was sampled with.
    pub point_seed: u64,
    /// Per-link surface sample counts, in link order.
    pub point_counts: Vec<usize>,
    /// Reference mesh per object category.
    pub references: BTreeMap<String, ManifestFile>,
    /// Gate thresholds and shape-descriptor settings used for filtering.
    pub filter: FilterConfig,
    /// Force-closure evaluation thresholds.
    pub eval: EvalConfig,
    /// Augmentation perturbation settings.
    pub perturb: PerturbConfig,
    /// Record files (JSON-lines), in dataset order.
    pub records: Vec<ManifestFile>,
}

impl DatasetManifest {
    /// Writes the manifest as pretty-printed JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("manifest does not serialize: {e}")))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest and verifies it against the files it references,
    /// resolved relative to the manifest's directory.
    pub fn load(path: &Path) -> Result<DatasetManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        let root = path.parent().unwrap_or_else(|| Path::new("."));
        manifest.verify(root)?;
        Ok(manifest)
    }

    /// Validates the config snapshots and re-hashes every referenced file
    /// (resolved against `root`).
    pub fn verify(&self, root: &Path) -> Result<()> {
        self.filter.validate()?;
        self.eval.validate()?;
        self.perturb.validate()?;
        if self.point_counts.is_empty() {
            return Err(Error::Invalid("manifest has no link point counts".into()));
        }
        self.robot.verify(root, "robot description")?;
        for (category, file) in &self.references {
            file.verify(root, &format!("reference mesh for '{category}'"))?;
        }
        for file in &self.records {
            file.verify(root, "record file")?;
        }
        Ok(())
    }
}

//! Dataset persistence and reporting: JSON-lines grasp records, the binary
//! distance-matrix format, ASCII PLY point clouds, posed-hand OBJ export for
//! visual inspection, hash-verified dataset manifests, and plain-text report
//! tables.
//!
//! Round-trip guarantees: the binary matrix format round-trips exactly (the
//! byte form is canonical); JSON and PLY write floats with shortest
//! round-trip formatting, so write→read reproduces every value bit-exactly.

mod drom;
mod export;
mod jsonl;
mod manifest;
mod ply;
mod report;

pub use drom::{
    matrix_from_bytes, matrix_to_bytes, read_matrix, write_matrix, DROM_MAGIC, DROM_VERSION,
};
pub use export::{export_posed_hand, posed_hand_mesh};
pub use jsonl::{read_records, write_records};
pub use manifest::{hash_file, DatasetManifest, ManifestFile};
pub use ply::{read_cloud, write_cloud};
pub use report::{render_filter_table, render_metrics_table, render_verdict_table};

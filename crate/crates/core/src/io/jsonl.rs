//! JSON-lines persistence for grasp records.
//!
//! One record per line so million-record datasets stream without loading
//! whole files; appending is a plain file append. Floats are serialized with
//! shortest round-trip formatting, so write→read is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::pipeline::GraspRecord;
use crate::{Error, Result};

/// Writes `records` to `path`, one JSON object per line.
pub fn write_records(path: &Path, records: &[GraspRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Internal(format!("record {} does not serialize: {e}", rec.id)))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines record file.
///
/// Blank lines are skipped. Schema violations and invalid stored poses are
/// reported with their 1-based line number.
pub fn read_records(path: &Path) -> Result<Vec<GraspRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraspRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        // JSON cannot carry non-finite numbers, but a non-unit quaternion is
        // representable; catch it here where we still know the line.
        if let Err(e) = rec.object_pose.to_isometry().and(rec.base.to_isometry()) {
            return Err(Error::parse(path, idx + 1, e.to_string()));
        }
        records.push(rec);
    }
    Ok(records)
}

//! The binary distance-matrix format.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset       | size  | field                          |
//! |--------------|-------|--------------------------------|
//! | 0            | 4     | magic `DROM`                   |
//! | 4            | 2     | format version, u16            |
//! | 6            | 4     | rows, u32                      |
//! | 10           | 4     | cols, u32                      |
//! | 14           | 4·r·c | entries, f32, row-major        |
//! | 14 + 4·r·c   | 8     | robot points hash, u64         |
//! | 22 + 4·r·c   | 8     | object points hash, u64        |
//!
//! Entries are rounded to f32 on write. Reading yields exactly the stored
//! values, so bytes → matrix → bytes is the identity, and matrix → bytes →
//! matrix is exact whenever the entries are f32-representable (always true
//! after one trip).

use std::path::Path;

use crate::dro::DistanceMatrix;
use crate::{Error, Result};

pub const DROM_MAGIC: [u8; 4] = *b"DROM";
pub const DROM_VERSION: u16 = 1;

/// Bytes before the entry block: magic, version, rows, cols.
const HEADER_LEN: usize = 14;
/// Bytes after the entry block: the two content hashes.
const FOOTER_LEN: usize = 16;

/// Serializes a validated matrix into the canonical byte form.
pub fn matrix_to_bytes(matrix: &DistanceMatrix) -> Result<Vec<u8>> {
    matrix.validate()?;
    let rows = u32::try_from(matrix.rows)
        .map_err(|_| Error::Invalid(format!("{} rows exceed the format's u32 limit", matrix.rows)))?;
    let cols = u32::try_from(matrix.cols)
        .map_err(|_| Error::Invalid(format!("{} cols exceed the format's u32 limit", matrix.cols)))?;

    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * matrix.data.len() + FOOTER_LEN);
    bytes.extend_from_slice(&DROM_MAGIC);
    bytes.extend_from_slice(&DROM_VERSION.to_le_bytes());
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    for (k, &v) in matrix.data.iter().enumerate() {
        let v32 = v as f32;
        if !v32.is_finite() {
            return Err(Error::Invalid(format!(
                "entry {k} ({v}) overflows the 32-bit storage format"
            )));
        }
        bytes.extend_from_slice(&v32.to_le_bytes());
    }
    bytes.extend_from_slice(&matrix.robot_points_hash.to_le_bytes());
    bytes.extend_from_slice(&matrix.object_points_hash.to_le_bytes());
    Ok(bytes)
}

/// Parses the byte form back into a matrix, validating magic, version,
/// exact length, and entry ranges.
pub fn matrix_from_bytes(bytes: &[u8]) -> Result<DistanceMatrix> {
    let min = HEADER_LEN + FOOTER_LEN;
    if bytes.len() < min {
        return Err(Error::Invalid(format!(
            "distance-matrix data is {} bytes; the format needs at least {min}",
            bytes.len()
        )));
    }
    if bytes[0..4] != DROM_MAGIC {
        return Err(Error::Invalid(format!(
            "bad magic {:02x?}; not a distance-matrix file",
            &bytes[0..4]
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DROM_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported distance-matrix format version {version} (supported: {DROM_VERSION})"
        )));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;

    // Check the declared size against the actual byte count before trusting
    // it with an allocation; a corrupt header must not trigger one.
    let expected = (rows as u128) * (cols as u128) * 4 + (min as u128);
    if bytes.len() as u128 != expected {
        return Err(Error::Invalid(format!(
            "distance-matrix data is {} bytes but a {rows}x{cols} matrix needs {expected}",
            bytes.len()
        )));
    }

    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[HEADER_LEN..bytes.len() - FOOTER_LEN].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    let footer = &bytes[bytes.len() - FOOTER_LEN..];
    let robot_points_hash = u64::from_le_bytes(footer[0..8].try_into().unwrap());
    let object_points_hash = u64::from_le_bytes(footer[8..16].try_into().unwrap());

    DistanceMatrix::new(rows, cols, data, robot_points_hash, object_points_hash)
}

/// Writes the canonical byte form to `path`.
pub fn write_matrix(path: &Path, matrix: &DistanceMatrix) -> Result<()> {
    let bytes = matrix_to_bytes(matrix)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a matrix file written by [`write_matrix`].
pub fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    matrix_from_bytes(&bytes)
}

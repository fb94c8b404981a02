//! ASCII PLY point clouds.
//!
//! A narrow, explicit subset: a single `vertex` element whose properties are
//! `x y z` (float or double) optionally followed by one integer `segment`
//! property carrying per-point link labels. Coordinates are written with
//! shortest round-trip formatting, so write→read reproduces every `f64`
//! bit-exactly. Anything outside the subset is rejected with the offending
//! line number rather than guessed at.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::geometry::PointCloud;
use crate::{Error, Result};

const FLOAT_TYPES: [&str; 4] = ["float", "float32", "double", "float64"];
const INT_TYPES: [&str; 8] =
    ["char", "uchar", "short", "ushort", "int", "uint", "int32", "uint32"];

/// Writes `cloud` as ASCII PLY; the `segment` property is emitted only when
/// the cloud carries labels.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, line: &str| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))
    };
    write(&mut out, "ply")?;
    write(&mut out, "format ascii 1.0")?;
    write(&mut out, &format!("element vertex {}", cloud.len()))?;
    write(&mut out, "property double x")?;
    write(&mut out, "property double y")?;
    write(&mut out, "property double z")?;
    if cloud.segments.is_some() {
        write(&mut out, "property uint segment")?;
    }
    write(&mut out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        match &cloud.segments {
            Some(seg) => write(&mut out, &format!("{} {} {} {}", p.x, p.y, p.z, seg[i]))?,
            None => write(&mut out, &format!("{} {} {}", p.x, p.y, p.z))?,
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a cloud written by [`write_cloud`] (or any PLY within the subset).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |expect: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("file ended before {expect}")))
    };

    let (n, line) = next("the `ply` magic line")?;
    if line != "ply" {
        return Err(Error::parse(path, n, format!("expected `ply`, found {line:?}")));
    }
    let (n, line) = next("the format line")?;
    if line != "format ascii 1.0" {
        return Err(Error::parse(path, n, format!("only `format ascii 1.0` is supported, found {line:?}")));
    }

    // Header: one vertex element, x/y/z properties, optional segment.
    let mut count: Option<usize> = None;
    let mut with_segment = false;
    let mut properties = 0usize;
    loop {
        let (n, line) = next("`end_header`")?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("comment") | None => continue,
            Some("end_header") => break,
            Some("element") => {
                let name = words.next().unwrap_or("");
                if name != "vertex" || count.is_some() {
                    return Err(Error::parse(path, n, format!("only a single vertex element is supported, found {line:?}")));
                }
                let c = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(path, n, format!("bad element count in {line:?}")))?;
                count = Some(c);
            }
            Some("property") => {
                let ty = words.next().unwrap_or("");
                let name = words.next().unwrap_or("");
                let ok = match properties {
                    0..=2 => {
                        FLOAT_TYPES.contains(&ty) && name == ["x", "y", "z"][properties]
                    }
                    3 => {
                        with_segment = true;
                        INT_TYPES.contains(&ty) && name == "segment"
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::parse(path, n, format!(
                        "unsupported property {line:?}; expected x y z (float/double), then optionally an integer segment"
                    )));
                }
                properties += 1;
            }
            Some(other) => {
                return Err(Error::parse(path, n, format!("unsupported header record {other:?}")));
            }
        }
    }
    let count =
        count.ok_or_else(|| Error::parse(path, 0, "header has no vertex element".to_string()))?;
    if properties < 3 {
        return Err(Error::parse(path, 0, format!("header declares {properties} properties; x, y, z are required")));
    }

    let mut points = Vec::with_capacity(count);
    let mut segments: Option<Vec<u32>> = with_segment.then(|| Vec::with_capacity(count));
    for (n, line) in &mut lines {
        if line.is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(Error::parse(path, n, format!("expected {count} vertex rows, found extra data")));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != properties {
            return Err(Error::parse(path, n, format!("expected {properties} values, found {}", tokens.len())));
        }
        let mut coord = [0.0f64; 3];
        for (slot, token) in coord.iter_mut().zip(&tokens) {
            *slot = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, n, format!("bad coordinate {token:?}")))?;
        }
        points.push(Point3::new(coord[0], coord[1], coord[2]));
        if let Some(seg) = &mut segments {
            let label = tokens[3]
                .parse::<u32>()
                .map_err(|_| Error::parse(path, n, format!("bad segment label {:?}", tokens[3])))?;
            seg.push(label);
        }
    }
    if points.len() != count {
        return Err(Error::parse(path, 0, format!("expected {count} vertex rows, found {}", points.len())));
    }
    PointCloud::with_segments(points, segments)
}

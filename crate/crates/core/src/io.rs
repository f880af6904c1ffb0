//! SemanticKITTI-style scan, label and calibration files.
//!
//! Scans are raw little-endian `f32` quadruples `(x, y, z, intensity)`.
//! Labels are raw little-endian `u32`, semantic class in the low 16 bits and
//! instance id in the high 16 bits.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3x4, Matrix4};

use crate::cloud::{Label, Point, PointCloud};
use crate::error::{Error, Result};

const POINT_BYTES: usize = 16;

pub fn read_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scan(&bytes).map(PointCloud::new)
}

pub fn decode_scan(bytes: &[u8]) -> Result<Vec<Point>> {
    if !bytes.len().is_multiple_of(POINT_BYTES) {
        return Err(Error::MalformedScan { len: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(POINT_BYTES)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]);
            Point::new(f(0), f(4), f(8), f(12))
        })
        .collect())
}

pub fn encode_scan(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_BYTES);
    for p in points {
        for v in [p.x, p.y, p.z, p.b] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_scan(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    if let Some(index) = cloud.points().iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidPoint { index });
    }
    write_atomic(path, &encode_scan(cloud.points()))
}

pub fn read_labels(path: impl AsRef<Path>, n_points: usize) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let labels = decode_labels(&bytes)?;
    if labels.len() != n_points {
        return Err(Error::LabelMismatch {
            expected: n_points,
            found: labels.len(),
        });
    }
    Ok(labels)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<Label>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::LabelMismatch {
            expected: bytes.len().div_ceil(4),
            found: bytes.len() / 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| unpack_label(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub fn unpack_label(raw: u32) -> Label {
    Label::new(raw & 0xFFFF, raw >> 16)
}

pub fn pack_label(label: Label) -> Option<u32> {
    (label.sem <= 0xFFFF && label.inst <= 0xFFFF).then_some(label.sem | (label.inst << 16))
}

pub fn encode_labels(labels: &[Label]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(labels.len() * 4);
    for (index, &l) in labels.iter().enumerate() {
        let raw = pack_label(l).ok_or(Error::LabelOverflow {
            index,
            sem: l.sem,
            inst: l.inst,
        })?;
        out.extend_from_slice(&raw.to_le_bytes());
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[Label]) -> Result<()> {
    write_atomic(path, &encode_labels(labels)?)
}

/// Reads a scan together with its label file.
pub fn read_labeled_scan(scan: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<PointCloud> {
    let cloud = read_scan(scan)?;
    let labels = read_labels(labels, cloud.len())?;
    cloud.set_labels(labels)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Camera rows from a KITTI calibration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `P{view}` 3x4 projection, pixels.
    pub projection: Matrix3x4<f64>,
    /// `Tr` LiDAR-to-camera transform padded with `[0, 0, 0, 1]`.
    pub extrinsic: Matrix4<f64>,
}

/// Parses the `P{view}:` and `Tr:` rows of a KITTI calibration file.
/// `Tr_velo_to_cam:` is accepted as an alias for `Tr:`.
pub fn read_calibration(path: impl AsRef<Path>, view: u8) -> Result<Calibration> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text, view)
}

pub fn parse_calibration(text: &str, view: u8) -> Result<Calibration> {
    let mut rows: HashMap<&str, Vec<f64>> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: `{tok}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.insert(key.trim(), values);
    }

    let p_key = format!("P{view}");
    let projection = rows
        .get(p_key.as_str())
        .ok_or_else(|| Error::MissingCalibration(p_key.clone()))?;
    let tr = rows
        .get("Tr")
        .or_else(|| rows.get("Tr_velo_to_cam"))
        .ok_or_else(|| Error::MissingCalibration("Tr".into()))?;
    for (key, row) in [(p_key.as_str(), projection), ("Tr", tr)] {
        if row.len() != 12 {
            return Err(Error::Parse(format!(
                "`{key}` has {} values, expected 12",
                row.len()
            )));
        }
    }

    let tr = Matrix3x4::from_row_slice(tr);
    let mut extrinsic = Matrix4::identity();
    extrinsic.fixed_view_mut::<3, 4>(0, 0).copy_from(&tr);
    Ok(Calibration {
        projection: Matrix3x4::from_row_slice(projection),
        extrinsic,
    })
}

/// Formats a calibration back into KITTI rows (used for synthetic fixtures).
pub fn format_calibration(calib: &Calibration, view: u8) -> String {
    let row = |vals: Vec<f64>| {
        vals.iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let p: Vec<f64> = (0..3)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| calib.projection[(r, c)])
        .collect();
    let t: Vec<f64> = (0..3)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| calib.extrinsic[(r, c)])
        .collect();
    format!("P{view}: {}\nTr: {}\n", row(p), row(t))
}

//! Raw LiDAR point files: consecutive little-endian `f32` records `(x, y, z, intensity)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, LidarView};

pub const POINT_RECORD_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub const fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Self { x, y, z, intensity }
    }

    /// Range from the sensor origin, evaluated in `f64`.
    pub fn range(&self) -> f64 {
        let (x, y, z) = (f64::from(self.x), f64::from(self.y), f64::from(self.z));
        (x * x + y * y + z * z).sqrt()
    }
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<Point>, DatasetError> {
    if !bytes.len().is_multiple_of(POINT_RECORD_BYTES) {
        return Err(DatasetError::Format(format!(
            "point data is {} bytes, not a multiple of {POINT_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    Ok(bytes
        .chunks_exact(POINT_RECORD_BYTES)
        .map(|r| Point::new(f(&r[0..4]), f(&r[4..8]), f(&r[8..12]), f(&r[12..16])))
        .collect())
}

pub fn encode_points(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_RECORD_BYTES);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_points(path: &Path) -> Result<Vec<Point>, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    decode_points(&bytes).map_err(|e| match e {
        DatasetError::Format(msg) => DatasetError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_points(path: &Path, points: &[Point]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
    }
    std::fs::write(path, encode_points(points)).map_err(|e| DatasetError::io(path, e))
}

/// Points of a LiDAR view, resolved against the dataset root.
pub fn load_points(root: &Path, view: &LidarView) -> Result<Vec<Point>, DatasetError> {
    let rel = view
        .points_ref
        .as_deref()
        .ok_or_else(|| DatasetError::Format("lidar view has no point file".into()))?;
    read_points(&root.join(rel))
}

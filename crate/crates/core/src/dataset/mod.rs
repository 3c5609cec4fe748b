//! Canonical dataset schema: a `manifest.json` holding the sensor rig and
//! provenance, plus a `frames.jsonl` with one frame per line.
//!
//! Loading validates every invariant and reports all violations at once.
//! Annotation boxes that spill past the image are clamped with a warning.

mod frame;
mod points;
mod rig;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use frame::{Annotation2D, Annotation3D, CameraView, Frame, LidarView};
pub use points::{decode_points, encode_points, load_points, read_points, write_points, Point, POINT_RECORD_BYTES};
pub use rig::{CameraSpec, LidarSpec, SensorRig, FOV_CONSISTENCY_TOL_RAD};

use crate::geometry::normalize_deg;
use crate::json;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{file}:{line}: {message}")]
    Parse { file: PathBuf, line: usize, message: String },
    #[error("dataset failed validation:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed point data: {0}")]
    Format(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A dataset held in memory. Referenced files resolve against the directory
/// the manifest was loaded from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rig: SensorRig,
    pub frames: Vec<Frame>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Default for SensorRig {
    fn default() -> Self {
        SensorRig {
            cameras: Vec::new(),
            lidar: LidarSpec {
                name: "LIDAR_TOP".into(),
                translation_m: [0.0; 3],
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    rig: SensorRig,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

impl DatasetManifest {
    pub fn frame(&self, frame_id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    /// Every relative file path referenced by the frames, sorted.
    pub fn referenced_files(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.frames {
            out.extend(f.camera_views.values().filter_map(|v| v.image_ref.clone()));
            out.extend(f.lidar_view.points_ref.clone());
        }
        out
    }

    /// Check all invariants without modifying anything. File references are
    /// checked only when `root` is given.
    pub fn validate(&self, root: Option<&Path>) -> Result<(), DatasetError> {
        let mut copy = self.clone();
        let errs = check(&mut copy, root, false);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::Validation(errs))
        }
    }
}

/// Directory a manifest path resolves against: the path itself if it is a
/// directory, otherwise its parent.
pub fn dataset_root(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn parse_err(file: &Path, line: usize, e: &serde_json::Error) -> DatasetError {
    DatasetError::Parse {
        file: file.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Parse a bare rig object or a manifest file carrying one under `rig`.
pub fn load_rig(path: &Path) -> Result<SensorRig, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), &e))?;
    let rig_value = match value.get("rig") {
        Some(r) => r.clone(),
        None => value,
    };
    let mut rig: SensorRig = serde_json::from_value(rig_value).map_err(|e| DatasetError::Parse {
        file: path.to_path_buf(),
        line: 0,
        message: format!("rig: {e}"),
    })?;
    for c in &mut rig.cameras {
        c.yaw_deg = normalize_deg(c.yaw_deg);
    }
    let mut errs = Vec::new();
    rig.check(&mut errs);
    if errs.is_empty() {
        Ok(rig)
    } else {
        Err(DatasetError::Validation(errs))
    }
}

/// Load and validate a dataset from a manifest file or the directory holding it.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let root = dataset_root(path);
    let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| DatasetError::io(&manifest_path, e))?;
    let head: ManifestFile =
        serde_json::from_str(&text).map_err(|e| parse_err(&manifest_path, e.line(), &e))?;

    let frames_path = root.join(FRAMES_FILE);
    let text = std::fs::read_to_string(&frames_path).map_err(|e| DatasetError::io(&frames_path, e))?;
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame: Frame = serde_json::from_str(line).map_err(|e| parse_err(&frames_path, i + 1, &e))?;
        frames.push(frame);
    }

    let mut manifest = DatasetManifest {
        rig: head.rig,
        frames,
        meta: head.meta,
    };
    let errs = check(&mut manifest, Some(&root), true);
    if errs.is_empty() {
        Ok(manifest)
    } else {
        Err(DatasetError::Validation(errs))
    }
}

/// Normalize yaw, clamp 2D boxes into their images (when `fix` is set) and
/// collect every invariant violation.
fn check(m: &mut DatasetManifest, root: Option<&Path>, fix: bool) -> Vec<String> {
    let mut errs = Vec::new();
    for cam in &mut m.rig.cameras {
        let normalized = normalize_deg(cam.yaw_deg);
        if fix {
            cam.yaw_deg = normalized;
        } else if cam.yaw_deg != normalized {
            errs.push(format!("camera `{}`: yaw_deg {} not in [-180, 180)", cam.name, cam.yaw_deg));
        }
    }
    m.rig.check(&mut errs);

    let mut ids = BTreeSet::new();
    for frame in &mut m.frames {
        let fid = frame.frame_id.clone();
        if !ids.insert(fid.clone()) {
            errs.push(format!("duplicate frame_id `{fid}`"));
        }
        for (cam_name, view) in &mut frame.camera_views {
            let Some(cam) = m.rig.camera(cam_name) else {
                errs.push(format!("frame `{fid}`: camera `{cam_name}` is not in the rig"));
                continue;
            };
            let (w, h) = (f64::from(cam.width_px), f64::from(cam.height_px));
            if let (Some(root), Some(img)) = (root, &view.image_ref) {
                if !root.join(img).is_file() {
                    errs.push(format!("frame `{fid}` camera `{cam_name}`: image `{img}` not found"));
                }
            }
            for ann in &mut view.annotations {
                let ctx = format!("frame `{fid}` camera `{cam_name}` instance `{}`", ann.instance_id);
                let b = ann.bbox;
                if !b.is_finite() || !b.is_ordered() {
                    errs.push(format!("{ctx}: malformed bbox {:?}", <[f64; 4]>::from(b)));
                    continue;
                }
                let clamped = b.clamped_to(w, h);
                if clamped != b {
                    if fix {
                        log::warn!("{ctx}: bbox {:?} clamped to the {w}x{h} image", <[f64; 4]>::from(b));
                        ann.bbox = clamped;
                    } else {
                        errs.push(format!("{ctx}: bbox extends past the {w}x{h} image"));
                    }
                }
                if !(clamped.area() > 0.0) {
                    errs.push(format!("{ctx}: bbox has no area inside the image"));
                }
            }
        }
        if let Some(rel) = &frame.lidar_view.points_ref {
            if let Some(root) = root {
                match std::fs::metadata(root.join(rel)) {
                    Ok(md) if md.is_file() => {
                        if md.len() % POINT_RECORD_BYTES as u64 != 0 {
                            errs.push(format!(
                                "frame `{fid}`: point file `{rel}` is {} bytes, not a multiple of {POINT_RECORD_BYTES}",
                                md.len()
                            ));
                        }
                    }
                    _ => errs.push(format!("frame `{fid}`: point file `{rel}` not found")),
                }
            }
        }
        for ann in &frame.lidar_view.annotations {
            if !ann.bbox.is_valid() {
                errs.push(format!(
                    "frame `{fid}` lidar instance `{}`: box must be finite with positive size",
                    ann.instance_id
                ));
            }
        }
    }
    errs
}

/// Write `manifest.json` and `frames.jsonl` into `out_dir`.
///
/// Output is byte-deterministic: keys are sorted and floats use the shortest
/// round-trip representation.
pub fn write_manifest(manifest: &DatasetManifest, out_dir: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(out_dir).map_err(|e| DatasetError::io(out_dir, e))?;
    let head = ManifestFile {
        rig: manifest.rig.clone(),
        meta: manifest.meta.clone(),
    };
    let head_text = json::to_canonical_pretty(&head).expect("manifest serializes");
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, head_text).map_err(|e| DatasetError::io(&path, e))?;

    let path = out_dir.join(FRAMES_FILE);
    let file = std::fs::File::create(&path).map_err(|e| DatasetError::io(&path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for frame in &manifest.frames {
        let line = json::to_canonical_string(frame).expect("frame serializes");
        writeln!(out, "{line}").map_err(|e| DatasetError::io(&path, e))?;
    }
    out.flush().map_err(|e| DatasetError::io(&path, e))
}

/// Write `manifest` into `out_dir` and make every referenced file available
/// there (hard link, falling back to a copy) from `src_root`.
pub fn export_dataset(manifest: &DatasetManifest, src_root: &Path, out_dir: &Path) -> Result<(), DatasetError> {
    write_manifest(manifest, out_dir)?;
    let same_dir = match (src_root.canonicalize(), out_dir.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same_dir {
        return Ok(());
    }
    for rel in manifest.referenced_files() {
        let src = src_root.join(&rel);
        let dst = out_dir.join(&rel);
        if dst.exists() {
            std::fs::remove_file(&dst).map_err(|e| DatasetError::io(&dst, e))?;
        }
        if let Some(parent) = dst.parent() {
            std::fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
        }
        if std::fs::hard_link(&src, &dst).is_err() {
            std::fs::copy(&src, &dst).map_err(|e| DatasetError::io(&src, e))?;
        }
    }
    Ok(())
}

//! Field-of-view arithmetic on the circle and the overlap crops it induces.

use serde::{Deserialize, Serialize};

use super::box2d::Box2D;
use super::pinhole::angle_to_column;
use crate::dataset::{CameraSpec, SensorRig};

/// Wrap an angle into `[-180, 180)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = (deg + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Counter-clockwise arc from `start_deg` to `end_deg`.
///
/// `start_deg` is kept in `[-180, 180)`; `end_deg = start_deg + width`, so it
/// may exceed 180 when the arc crosses the rear seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularInterval {
    pub start_deg: f64,
    pub end_deg: f64,
}

impl AngularInterval {
    pub fn new(start_deg: f64, width_deg: f64) -> Self {
        let start = normalize_deg(start_deg);
        Self {
            start_deg: start,
            end_deg: start + width_deg,
        }
    }

    pub fn width(&self) -> f64 {
        self.end_deg - self.start_deg
    }

    /// Whether `deg` lies on the closed arc.
    pub fn contains(&self, deg: f64) -> bool {
        (deg - self.start_deg).rem_euclid(360.0) <= self.width()
    }

    /// Whether `deg` lies strictly inside the arc.
    pub fn contains_strictly(&self, deg: f64) -> bool {
        let off = (deg - self.start_deg).rem_euclid(360.0);
        off > 0.0 && off < self.width()
    }

    pub fn center(&self) -> f64 {
        normalize_deg(self.start_deg + self.width() / 2.0)
    }

    /// Intersection of two arcs; `None` when empty or a single point.
    ///
    /// Arcs whose widths sum past 360° can meet in two pieces; the wider one is
    /// returned. Camera FoVs are below 180° so this never happens for a rig.
    pub fn intersect(&self, other: &AngularInterval) -> Option<AngularInterval> {
        let wa = self.width();
        let wb = other.width();
        let d = (other.start_deg - self.start_deg).rem_euclid(360.0);
        // `other` relative to `self.start`, as [d, d + wb] and its copy one turn back.
        let pieces = [(d, (d + wb).min(wa)), (0.0, (d - 360.0 + wb).min(wa))];
        pieces
            .into_iter()
            .filter(|(lo, hi)| hi > lo)
            .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
            .map(|(lo, hi)| AngularInterval::new(self.start_deg + lo, hi - lo))
    }
}

/// Horizontal FoV of a camera as an arc centered on its yaw.
pub fn fov_interval(cam: &CameraSpec) -> AngularInterval {
    AngularInterval::new(cam.yaw_deg - cam.hfov_deg / 2.0, cam.hfov_deg)
}

/// Pixel-column band `[col_lo, col_hi)` of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub col_lo: f64,
    pub col_hi: f64,
}

impl ColumnRange {
    pub fn width(&self) -> f64 {
        self.col_hi - self.col_lo
    }

    /// Full-height image region covered by the band.
    pub fn region(&self, height_px: u32) -> Box2D {
        Box2D::new(self.col_lo, 0.0, self.col_hi, f64::from(height_px))
    }
}

/// Two cameras whose horizontal FoVs intersect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub cam_a: String,
    pub cam_b: String,
    pub overlap: AngularInterval,
    pub crop_a: ColumnRange,
    pub crop_b: ColumnRange,
}

impl OverlapPair {
    /// `CAM_A+CAM_B`, used as the pair label in tables.
    pub fn key(&self) -> String {
        format!("{}+{}", self.cam_a, self.cam_b)
    }

    pub fn crop_for(&self, camera: &str) -> Option<ColumnRange> {
        if camera == self.cam_a {
            Some(self.crop_a)
        } else if camera == self.cam_b {
            Some(self.crop_b)
        } else {
            None
        }
    }
}

/// Columns covered by the ego-frame arc `arc` in `cam`'s image.
pub fn crop_columns(cam: &CameraSpec, arc: &AngularInterval) -> ColumnRange {
    // Arc ends relative to the optical axis. `arc` lies within the FoV, so the
    // relative angles stay within ±hfov/2 (up to rounding, absorbed by the clamp).
    let half = cam.hfov_deg / 2.0;
    let rel = |deg: f64| normalize_deg(deg - cam.yaw_deg).clamp(-half, half);
    let left = rel(arc.end_deg);
    let right = rel(arc.start_deg);
    let col = |a: f64| angle_to_column(cam, a).expect("angle clamped into FoV");
    // positive (leftward) angles map to smaller columns
    ColumnRange {
        col_lo: col(left),
        col_hi: col(right),
    }
}

/// All unordered camera pairs with a non-empty FoV intersection, sorted by
/// `(cam_a, cam_b)` with `cam_a < cam_b`.
pub fn find_overlap_pairs(rig: &SensorRig) -> Vec<OverlapPair> {
    let mut cams: Vec<&CameraSpec> = rig.cameras.iter().collect();
    cams.sort_by(|a, b| a.name.cmp(&b.name));
    let mut pairs = Vec::new();
    for (i, a) in cams.iter().enumerate() {
        for b in &cams[i + 1..] {
            let Some(overlap) = fov_interval(a).intersect(&fov_interval(b)) else {
                continue;
            };
            pairs.push(OverlapPair {
                cam_a: a.name.clone(),
                cam_b: b.name.clone(),
                overlap,
                crop_a: crop_columns(a, &overlap),
                crop_b: crop_columns(b, &overlap),
            });
        }
    }
    pairs
}

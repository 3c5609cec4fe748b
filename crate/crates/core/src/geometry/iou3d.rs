//! Yaw-aware 3D IoU: BEV convex-polygon intersection times vertical overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::box3d::{Box3D, LocalFrame};

type P2 = [f64; 2];

/// Which overlap measure to match 3D boxes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    /// Rotated BEV polygon intersection times height overlap.
    #[default]
    Rotated3d,
    /// Rotated BEV polygon intersection only.
    Bev,
}

impl IouMode {
    pub fn iou(self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            IouMode::Rotated3d => iou3d(a, b),
            IouMode::Bev => iou_bev(a, b),
        }
    }
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn polygon_area(poly: &[P2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    (twice / 2.0).abs()
}

fn line_intersection(p: P2, q: P2, a: P2, b: P2) -> P2 {
    // point on segment p->q where it crosses the line a->b
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman clip of `subject` against the convex CCW polygon `clip`.
///
/// Points on a clip edge count as inside, so polygons that only share an edge
/// or a vertex clip to a degenerate polygon of zero area.
pub fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

/// Area of the intersection of the two boxes' BEV footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let pa = a.footprint();
    let pb = b.footprint();
    // cheap reject on circumscribed circles
    let ra = 0.5 * a.width().hypot(a.length());
    let rb = 0.5 * b.width().hypot(b.length());
    let dc = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
    if dc >= ra + rb {
        return 0.0;
    }
    let area = polygon_area(&clip_convex(&pa, &pb));
    area.min(a.width() * a.length()).min(b.width() * b.length())
}

fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let (a0, a1) = a.z_range();
    let (b0, b1) = b.z_range();
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Rotated 3D IoU. Symmetric, in `[0, 1]`, exactly 1 for identical boxes.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let h = vertical_overlap(a, b);
    if h <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * h;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// BEV-only IoU of the rotated footprints.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    if a.center[..2] == b.center[..2] && a.size[..2] == b.size[..2] && a.yaw == b.yaw {
        return 1.0;
    }
    let inter = bev_intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.width() * a.length() + b.width() * b.length() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Monte-Carlo estimate of the 3D IoU.
///
/// Draws `samples` uniform points in the axis-aligned bounding region of both
/// boxes and returns `|in both| / |in either|` (0 when no sample lands in
/// either box). Deterministic for a fixed `seed`.
pub fn mc_iou3d(a: &Box3D, b: &Box3D, samples: u64, seed: u64) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in a.corners().iter().chain(b.corners().iter()) {
        for k in 0..3 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let fa = LocalFrame::new(a);
    let fb = LocalFrame::new(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..samples {
        let p = [
            lo[0] + rng.random::<f64>() * span[0],
            lo[1] + rng.random::<f64>() * span[1],
            lo[2] + rng.random::<f64>() * span[2],
        ];
        let ia = fa.contains(p);
        let ib = fb.contains(p);
        both += u64::from(ia && ib);
        either += u64::from(ia || ib);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

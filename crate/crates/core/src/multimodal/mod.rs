//! Camera/LiDAR cross-modal redundancy.
//!
//! A fusion ("base") detection is redundant when some LiDAR-only detection in
//! the same frame overlaps it with IoU >= theta. Near-range LiDAR boxes and
//! points are pruned by centroid distance, and the lost ratio measures how
//! many baseline detections such pruning would cost.

mod detections;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use detections::{read_detection_sets, write_detection_sets, Detection, DetectionSet, DetectionSource};

use crate::dataset::Point;
use crate::geometry::{centroid_distance, Box3D, IouMode};
use crate::stats::{welch_ttest, StatsError, TTestResult};

pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MultimodalError {
    #[error("detection sets belong to different frames (`{base}` vs `{lidar}`)")]
    FrameMismatch { base: String, lidar: String },
    #[error("IoU threshold {0} outside (0, 1]")]
    InvalidTheta(f64),
    #[error("baseline detection set is empty")]
    EmptyBaseline,
    #[error("pruned set contains a detection absent from the baseline")]
    NotSubset,
    #[error("distance threshold {0} must be a non-negative number")]
    InvalidDistance(f64),
    #[error("partition is degenerate ({high} high-redundancy vs {low} low-redundancy samples)")]
    DegeneratePartition { high: usize, low: usize },
    #[error("detection {index} of frame `{frame_id}` is invalid")]
    InvalidDetection { frame_id: String, index: usize },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMatch {
    pub base_index: usize,
    pub lidar_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyResult {
    pub frame_id: String,
    /// `None` when the baseline is empty.
    pub rr: Option<f64>,
    pub theta: f64,
    pub n_base: usize,
    pub n_lidar: usize,
    /// Best LiDAR partner of every matched baseline box, by baseline index.
    pub matched: Vec<BoxMatch>,
}

impl RedundancyResult {
    pub fn n_matched(&self) -> usize {
        self.matched.len()
    }

    pub fn is_matched(&self, base_index: usize) -> bool {
        self.matched.binary_search_by_key(&base_index, |m| m.base_index).is_ok()
    }
}

fn check_theta(theta: f64) -> Result<(), MultimodalError> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(MultimodalError::InvalidTheta(theta))
    }
}

/// Fraction of baseline boxes that some LiDAR-only box overlaps with IoU >= `theta`.
///
/// Matching is an existence test: one LiDAR box may vouch for several
/// baseline boxes.
pub fn redundancy_ratio(
    base: &DetectionSet,
    lidar: &DetectionSet,
    theta: f64,
    mode: IouMode,
) -> Result<RedundancyResult, MultimodalError> {
    if base.frame_id != lidar.frame_id {
        return Err(MultimodalError::FrameMismatch {
            base: base.frame_id.clone(),
            lidar: lidar.frame_id.clone(),
        });
    }
    check_theta(theta)?;
    let mut matched = Vec::new();
    for (bi, b) in base.boxes.iter().enumerate() {
        let best = lidar
            .boxes
            .iter()
            .enumerate()
            .map(|(li, l)| (li, mode.iou(&b.bbox, &l.bbox)))
            .filter(|&(_, iou)| iou >= theta)
            // highest IoU, lowest index on ties
            .fold(None::<(usize, f64)>, |acc, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            });
        if let Some((li, iou)) = best {
            matched.push(BoxMatch {
                base_index: bi,
                lidar_index: li,
                iou,
            });
        }
    }
    let n_base = base.boxes.len();
    Ok(RedundancyResult {
        frame_id: base.frame_id.clone(),
        rr: (n_base > 0).then(|| matched.len() as f64 / n_base as f64),
        theta,
        n_base,
        n_lidar: lidar.boxes.len(),
        matched,
    })
}

/// Boxes whose centroid lies at least `t_dist` from the sensor, in input order.
pub fn prune_by_distance(boxes: &[Box3D], t_dist: f64) -> Vec<Box3D> {
    boxes.iter().copied().filter(|b| centroid_distance(b) >= t_dist).collect()
}

/// Detection-set form of [`prune_by_distance`]; the result is labelled `Pruned`.
pub fn prune_detections_by_distance(set: &DetectionSet, t_dist: f64) -> DetectionSet {
    DetectionSet {
        frame_id: set.frame_id.clone(),
        source: DetectionSource::Pruned,
        boxes: set.boxes.iter().filter(|d| d.distance() >= t_dist).cloned().collect(),
    }
}

/// Points at least `t_dist` from the sensor origin.
pub fn prune_points_by_distance(points: &[Point], t_dist: f64) -> Vec<Point> {
    points.iter().copied().filter(|p| p.range() >= t_dist).collect()
}

/// Baseline detections lost to pruning, kept as exact counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LostRatio {
    pub total: usize,
    /// `|base \ pruned|`
    pub removed: usize,
    /// `|base ∩ pruned|`
    pub retained: usize,
}

impl LostRatio {
    /// `|base \ pruned| / |base|`
    pub fn value(&self) -> f64 {
        self.removed as f64 / self.total as f64
    }

    /// `1 - |base ∩ pruned| / |base|`
    pub fn value_from_intersection(&self) -> f64 {
        1.0 - self.retained as f64 / self.total as f64
    }

    /// Whether the set-difference and intersection forms agree as rationals.
    pub fn forms_agree(&self) -> bool {
        // removed/total == 1 - retained/total  <=>  removed == total - retained
        self.total.checked_sub(self.retained) == Some(self.removed)
    }

    pub fn merge(self, other: LostRatio) -> LostRatio {
        LostRatio {
            total: self.total + other.total,
            removed: self.removed + other.removed,
            retained: self.retained + other.retained,
        }
    }
}

/// Identity key of a detection: exact bit patterns of every field.
fn detection_key(d: &Detection) -> (Vec<u64>, Option<u64>, Option<String>) {
    let b = &d.bbox;
    let bits = b.center.iter().chain(&b.size).chain(std::iter::once(&b.yaw)).map(|v| v.to_bits()).collect();
    (bits, d.score.map(f64::to_bits), d.category.clone())
}

type Multiset = HashMap<(Vec<u64>, Option<u64>, Option<String>), usize>;

fn multiset(set: &DetectionSet) -> Multiset {
    let mut m = HashMap::new();
    for d in &set.boxes {
        *m.entry(detection_key(d)).or_insert(0) += 1;
    }
    m
}

/// Fraction of baseline detections missing from `pruned`.
///
/// `pruned` must be a sub-multiset of `base`; detections are identified by
/// exact equality. The difference is counted by walking `base` and the
/// intersection by walking `pruned`, so the two forms are independent tallies.
pub fn lost_ratio(base: &DetectionSet, pruned: &DetectionSet) -> Result<LostRatio, MultimodalError> {
    if base.boxes.is_empty() {
        return Err(MultimodalError::EmptyBaseline);
    }
    // |base \ pruned|
    let mut available = multiset(pruned);
    let mut removed = 0;
    for d in &base.boxes {
        match available.get_mut(&detection_key(d)) {
            Some(n) if *n > 0 => *n -= 1,
            _ => removed += 1,
        }
    }
    if available.values().any(|&n| n > 0) {
        return Err(MultimodalError::NotSubset);
    }
    // |base ∩ pruned|
    let mut in_base = multiset(base);
    let mut retained = 0;
    for d in &pruned.boxes {
        if let Some(n) = in_base.get_mut(&detection_key(d)) {
            if *n > 0 {
                *n -= 1;
                retained += 1;
            }
        }
    }
    Ok(LostRatio {
        total: base.boxes.len(),
        removed,
        retained,
    })
}

/// One point of a distance-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub t_dist: f64,
    pub boxes_total: usize,
    /// LiDAR-only boxes at or beyond `t_dist`.
    pub boxes_retained: usize,
    /// Point counts, when point clouds were supplied.
    pub points_total: Option<usize>,
    pub points_retained: Option<usize>,
    /// `None` when the baseline is empty.
    pub lost: Option<LostRatio>,
    pub lost_ratio: Option<f64>,
    /// Redundancy of the full baseline against the pruned LiDAR boxes.
    pub rr: Option<f64>,
    pub n_base: usize,
    pub n_matched: usize,
}

/// Inputs of one frame for a distance sweep.
#[derive(Debug, Clone, Copy)]
pub struct FrameDetections<'a> {
    pub base: &'a DetectionSet,
    pub lidar: &'a DetectionSet,
    pub points: Option<&'a [Point]>,
}

fn check_grid(t_values: &[f64]) -> Result<(), MultimodalError> {
    if let Some(&bad) = t_values.iter().find(|t| !(**t >= 0.0)) {
        return Err(MultimodalError::InvalidDistance(bad));
    }
    Ok(())
}

fn outcome_at(frames: &[FrameDetections<'_>], t: f64, theta: f64, mode: IouMode) -> Result<PruneOutcome, MultimodalError> {
    let mut out = PruneOutcome {
        t_dist: t,
        boxes_total: 0,
        boxes_retained: 0,
        points_total: None,
        points_retained: None,
        lost: None,
        lost_ratio: None,
        rr: None,
        n_base: 0,
        n_matched: 0,
    };
    let mut lost: Option<LostRatio> = None;
    for f in frames {
        let pruned_lidar = prune_detections_by_distance(f.lidar, t);
        out.boxes_total += f.lidar.boxes.len();
        out.boxes_retained += pruned_lidar.boxes.len();
        if let Some(points) = f.points {
            *out.points_total.get_or_insert(0) += points.len();
            *out.points_retained.get_or_insert(0) += points.iter().filter(|p| p.range() >= t).count();
        }
        // baseline detections whose support was pruned are treated as lost
        let pruned_base = prune_detections_by_distance(f.base, t);
        match lost_ratio(f.base, &pruned_base) {
            Ok(l) => lost = Some(lost.map_or(l, |acc| acc.merge(l))),
            Err(MultimodalError::EmptyBaseline) => {}
            Err(e) => return Err(e),
        }
        let lidar_for_rr = DetectionSet {
            frame_id: f.base.frame_id.clone(),
            ..pruned_lidar
        };
        let rr = redundancy_ratio(f.base, &lidar_for_rr, theta, mode)?;
        out.n_base += rr.n_base;
        out.n_matched += rr.n_matched();
    }
    out.lost = lost;
    out.lost_ratio = lost.map(|l| l.value());
    out.rr = (out.n_base > 0).then(|| out.n_matched as f64 / out.n_base as f64);
    Ok(out)
}

/// Sweep the pruning distance over `t_values` (ascending) for one frame.
pub fn sweep_distance(
    base: &DetectionSet,
    lidar: &DetectionSet,
    t_values: &[f64],
    theta: f64,
    mode: IouMode,
) -> Result<Vec<PruneOutcome>, MultimodalError> {
    sweep_distance_frames(
        &[FrameDetections {
            base,
            lidar,
            points: None,
        }],
        t_values,
        theta,
        mode,
    )
}

/// Dataset-level sweep: counts are pooled over frames before forming ratios.
pub fn sweep_distance_frames(
    frames: &[FrameDetections<'_>],
    t_values: &[f64],
    theta: f64,
    mode: IouMode,
) -> Result<Vec<PruneOutcome>, MultimodalError> {
    check_theta(theta)?;
    check_grid(t_values)?;
    for f in frames {
        if f.base.frame_id != f.lidar.frame_id {
            return Err(MultimodalError::FrameMismatch {
                base: f.base.frame_id.clone(),
                lidar: f.lidar.frame_id.clone(),
            });
        }
    }
    t_values.iter().map(|&t| outcome_at(frames, t, theta, mode)).collect()
}

/// How to split samples into high- and low-redundancy groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RedundancySplit {
    /// Per baseline box: distance samples of matched vs unmatched boxes.
    PerBox,
    /// Per frame: mean box distance of frames with `rr >= threshold` vs the rest.
    FrameRrThreshold { threshold: f64 },
    /// As `FrameRrThreshold`, with the threshold at quantile `q` of frame rr values.
    FrameRrQuantile { q: f64 },
}

impl RedundancySplit {
    pub fn label(&self) -> String {
        match self {
            RedundancySplit::PerBox => "per_box".into(),
            RedundancySplit::FrameRrThreshold { threshold } => format!("frame_rr_threshold:{threshold}"),
            RedundancySplit::FrameRrQuantile { q } => format!("frame_rr_quantile:{q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePartition {
    pub split: RedundancySplit,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
}

/// Linear-interpolated sample quantile (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Partition baseline-box distances into high- and low-redundancy samples.
///
/// `results[i]` must describe `bases[i]`.
pub fn distance_redundancy_groups(
    results: &[RedundancyResult],
    bases: &[DetectionSet],
    split: RedundancySplit,
) -> Result<DistancePartition, MultimodalError> {
    for (r, b) in results.iter().zip(bases) {
        if r.frame_id != b.frame_id {
            return Err(MultimodalError::FrameMismatch {
                base: b.frame_id.clone(),
                lidar: r.frame_id.clone(),
            });
        }
    }
    let (mut high, mut low) = (Vec::new(), Vec::new());
    let frame_threshold = match split {
        RedundancySplit::PerBox => None,
        RedundancySplit::FrameRrThreshold { threshold } => Some(threshold),
        RedundancySplit::FrameRrQuantile { q } => {
            let rrs: Vec<f64> = results.iter().filter_map(|r| r.rr).collect();
            Some(quantile(&rrs, q).unwrap_or(f64::INFINITY))
        }
    };
    for (r, b) in results.iter().zip(bases) {
        match frame_threshold {
            None => {
                for (i, d) in b.boxes.iter().enumerate() {
                    if r.is_matched(i) {
                        high.push(d.distance());
                    } else {
                        low.push(d.distance());
                    }
                }
            }
            Some(th) => {
                let Some(rr) = r.rr else { continue };
                let mean = b.boxes.iter().map(Detection::distance).sum::<f64>() / b.boxes.len() as f64;
                if rr >= th {
                    high.push(mean);
                } else {
                    low.push(mean);
                }
            }
        }
    }
    if high.is_empty() || low.is_empty() {
        return Err(MultimodalError::DegeneratePartition {
            high: high.len(),
            low: low.len(),
        });
    }
    Ok(DistancePartition { split, high, low })
}

/// Partition distances and run Welch's t-test of high vs low redundancy.
pub fn distance_ttest(
    results: &[RedundancyResult],
    bases: &[DetectionSet],
    split: RedundancySplit,
) -> Result<(DistancePartition, TTestResult), MultimodalError> {
    let part = distance_redundancy_groups(results, bases, split)?;
    let t = welch_ttest(&part.high, &part.low)?;
    Ok((part, t))
}

//! Cross-camera redundancy: overlap-crop similarity and completeness-guided
//! pruning of duplicate annotations.
//!
//! An instance annotated inside the overlap crops of both cameras of a pair
//! forms a redundant group. Each member is scored by how much of its box the
//! crop shows (the completeness score). When the spread of scores within a
//! group exceeds `tau`, only the most complete member survives.

mod similarity;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use similarity::{
    cosine_similarity, crop_cosine, crop_feature, crop_similarity, load_gray, CropSimilarity, SIMILARITY_GRID,
};

use crate::dataset::{Annotation2D, DatasetManifest, Frame, SensorRig};
use crate::geometry::{clip_box2d, find_overlap_pairs, Box2D, OverlapPair};

#[derive(Debug, thiserror::Error)]
pub enum MultisourceError {
    #[error("frame `{frame_id}` has no image for camera `{camera}`")]
    MissingImage { frame_id: String, camera: String },
    #[error("cannot decode {path}: {message}")]
    Decode { path: String, message: String },
    #[error("crops are not comparable: {0}")]
    NotComparable(&'static str),
    #[error("box has zero area")]
    DegenerateBox,
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
}

/// Fraction of `b`'s area that lies inside `crop_region`.
pub fn bcs(b: &Box2D, crop_region: &Box2D) -> Result<f64, MultisourceError> {
    let full = b.area();
    if !(full > 0.0) {
        return Err(MultisourceError::DegenerateBox);
    }
    let visible = clip_box2d(b, crop_region).map_or(0.0, |c| c.area());
    Ok((visible / full).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub camera: String,
    /// Position of the annotation in its camera view.
    pub index: usize,
    pub annotation: Annotation2D,
    pub bcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantGroup {
    pub instance_id: String,
    pub members: Vec<GroupMember>,
}

impl RedundantGroup {
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m.bcs), hi.max(m.bcs))
        });
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcsDecision {
    pub group: RedundantGroup,
    pub tau: f64,
    pub kept: Vec<GroupMember>,
    pub removed: Vec<GroupMember>,
}

/// Annotations of `camera` whose boxes share area with its crop of `pair`.
fn members_in_crop(rig: &SensorRig, frame: &Frame, pair: &OverlapPair, camera: &str) -> Vec<GroupMember> {
    let (Some(cam), Some(view), Some(crop)) = (rig.camera(camera), frame.view(camera), pair.crop_for(camera)) else {
        return Vec::new();
    };
    let region = crop.region(cam.height_px);
    view.annotations
        .iter()
        .enumerate()
        .filter_map(|(index, ann)| {
            let score = bcs(&ann.bbox, &region).ok()?;
            (score > 0.0).then(|| GroupMember {
                camera: camera.to_string(),
                index,
                annotation: ann.clone(),
                bcs: score,
            })
        })
        .collect()
}

/// Instances annotated inside the overlap crops of both cameras of `pair`,
/// ordered by `instance_id`.
pub fn find_redundant_groups(rig: &SensorRig, frame: &Frame, pair: &OverlapPair) -> Vec<RedundantGroup> {
    let mut by_id: BTreeMap<String, (Vec<GroupMember>, Vec<GroupMember>)> = BTreeMap::new();
    for m in members_in_crop(rig, frame, pair, &pair.cam_a) {
        by_id.entry(m.annotation.instance_id.clone()).or_default().0.push(m);
    }
    for m in members_in_crop(rig, frame, pair, &pair.cam_b) {
        by_id.entry(m.annotation.instance_id.clone()).or_default().1.push(m);
    }
    by_id
        .into_iter()
        .filter(|(_, (a, b))| !a.is_empty() && !b.is_empty())
        .map(|(instance_id, (mut a, b))| {
            a.extend(b);
            RedundantGroup { instance_id, members: a }
        })
        .collect()
}

/// Apply the completeness rule to each group.
///
/// If `max BCS - min BCS > tau`, every member below the maximum is removed
/// (members tied at the maximum all stay); otherwise the group is kept whole.
pub fn apply_bcs_pruning(groups: &[RedundantGroup], tau: f64) -> Vec<BcsDecision> {
    groups
        .iter()
        .map(|g| {
            let max = g.members.iter().map(|m| m.bcs).fold(f64::NEG_INFINITY, f64::max);
            let (kept, removed) = if g.spread() > tau {
                g.members.iter().cloned().partition(|m| m.bcs == max)
            } else {
                (g.members.clone(), Vec::new())
            };
            BcsDecision {
                group: g.clone(),
                tau,
                kept,
                removed,
            }
        })
        .collect()
}

/// Pruning outcome of one frame at one threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FramePruning {
    pub frame_id: String,
    /// Per pair key: (group count, removed member count).
    pub per_pair: BTreeMap<String, (usize, usize)>,
    /// `(camera, annotation index)` of every annotation to drop.
    pub removed: BTreeSet<(String, usize)>,
}

pub fn plan_frame_pruning(rig: &SensorRig, pairs: &[OverlapPair], frame: &Frame, tau: f64) -> FramePruning {
    let mut out = FramePruning {
        frame_id: frame.frame_id.clone(),
        ..Default::default()
    };
    for pair in pairs {
        let groups = find_redundant_groups(rig, frame, pair);
        let decisions = apply_bcs_pruning(&groups, tau);
        let removed: usize = decisions.iter().map(|d| d.removed.len()).sum();
        out.per_pair.insert(pair.key(), (groups.len(), removed));
        for d in decisions {
            out.removed.extend(d.removed.into_iter().map(|m| (m.camera, m.index)));
        }
    }
    out
}

fn apply_plan(frame: &Frame, plan: &FramePruning) -> Frame {
    let mut out = frame.clone();
    for (camera, view) in &mut out.camera_views {
        let mut idx = 0;
        view.annotations.retain(|_| {
            let keep = !plan.removed.contains(&(camera.clone(), idx));
            idx += 1;
            keep
        });
    }
    out
}

/// Copy of `manifest` with the annotations removed by the completeness rule at
/// `tau` dropped. Provenance goes to `meta` under `bcs_tau`, `bcs_groups` and
/// `bcs_removed`.
pub fn prune_dataset(manifest: &DatasetManifest, tau: f64) -> DatasetManifest {
    prune_with_plans(manifest, tau).0
}

fn prune_with_plans(manifest: &DatasetManifest, tau: f64) -> (DatasetManifest, Vec<FramePruning>) {
    let pairs = find_overlap_pairs(&manifest.rig);
    let plans: Vec<FramePruning> = manifest
        .frames
        .par_iter()
        .map(|f| plan_frame_pruning(&manifest.rig, &pairs, f, tau))
        .collect();
    let frames = manifest.frames.iter().zip(&plans).map(|(f, p)| apply_plan(f, p)).collect();
    let groups: usize = plans.iter().flat_map(|p| p.per_pair.values()).map(|(g, _)| g).sum();
    let removed: usize = plans.iter().map(|p| p.removed.len()).sum();
    let mut meta = manifest.meta.clone();
    meta.insert("bcs_tau".into(), serde_json::json!(tau));
    meta.insert("bcs_groups".into(), serde_json::json!(groups));
    meta.insert("bcs_removed".into(), serde_json::json!(removed));
    (
        DatasetManifest {
            rig: manifest.rig.clone(),
            frames,
            meta,
        },
        plans,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionStats {
    pub tau: f64,
    pub groups: usize,
    pub annotations_before: usize,
    pub annotations_after: usize,
    pub removed: usize,
    pub per_camera_before: BTreeMap<String, usize>,
    pub per_camera_after: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct SweepVariant {
    pub tau: f64,
    pub manifest: DatasetManifest,
    pub stats: RetentionStats,
    pub plans: Vec<FramePruning>,
}

pub fn per_camera_counts(manifest: &DatasetManifest) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = manifest.rig.cameras.iter().map(|c| (c.name.clone(), 0)).collect();
    for f in &manifest.frames {
        for (cam, view) in &f.camera_views {
            *out.entry(cam.clone()).or_default() += view.annotations.len();
        }
    }
    out
}

/// One pruned variant per threshold; `taus` must be ascending.
pub fn sweep_bcs(manifest: &DatasetManifest, taus: &[f64]) -> Result<Vec<SweepVariant>, MultisourceError> {
    if taus.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(MultisourceError::UnsortedThresholds);
    }
    let before = per_camera_counts(manifest);
    let total_before: usize = before.values().sum();
    Ok(taus
        .par_iter()
        .map(|&tau| {
            let (pruned, plans) = prune_with_plans(manifest, tau);
            let after = per_camera_counts(&pruned);
            let total_after: usize = after.values().sum();
            let groups = plans.iter().flat_map(|p| p.per_pair.values()).map(|(g, _)| g).sum();
            SweepVariant {
                tau,
                stats: RetentionStats {
                    tau,
                    groups,
                    annotations_before: total_before,
                    annotations_after: total_after,
                    removed: total_before - total_after,
                    per_camera_before: before.clone(),
                    per_camera_after: after,
                },
                manifest: pruned,
                plans,
            }
        })
        .collect())
}

/// Thresholds `lo, lo + step, ...` up to `hi` inclusive, snapped to the grid so
/// that `0.0:1.0:0.2` yields exactly six values ending at 1.0.
pub fn threshold_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return vec![lo];
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let v = lo + step * i as f64;
            // strip accumulated binary noise (0.6000000000000001 -> 0.6)
            let snapped = (v * 1e9).round() / 1e9;
            snapped.min(hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CameraSpec, CameraView, LidarSpec};

    /// Two identical 100x100 cameras: the overlap crop is the full image.
    fn twin_rig() -> SensorRig {
        SensorRig {
            cameras: vec![
                CameraSpec::from_fov("A", 0.0, 60.0, 100, 100),
                CameraSpec::from_fov("B", 0.0, 60.0, 100, 100),
            ],
            lidar: LidarSpec {
                name: "L".into(),
                translation_m: [0.0; 3],
            },
        }
    }

    fn ann(id: &str, b: [f64; 4]) -> Annotation2D {
        Annotation2D {
            instance_id: id.into(),
            category: "car".into(),
            bbox: b.into(),
        }
    }

    fn frame(a: Vec<Annotation2D>, b: Vec<Annotation2D>) -> Frame {
        let mut cams = BTreeMap::new();
        cams.insert(
            "A".to_string(),
            CameraView {
                image_ref: None,
                annotations: a,
            },
        );
        cams.insert(
            "B".to_string(),
            CameraView {
                image_ref: None,
                annotations: b,
            },
        );
        Frame {
            frame_id: "f".into(),
            timestamp_us: 0,
            camera_views: cams,
            lidar_view: Default::default(),
        }
    }

    fn member(camera: &str, bcs: f64) -> GroupMember {
        GroupMember {
            camera: camera.into(),
            index: 0,
            annotation: ann("x", [0.0, 0.0, 1.0, 1.0]),
            bcs,
        }
    }

    #[test]
    fn bcs_examples() {
        let crop = Box2D::new(50.0, 0.0, 200.0, 200.0);
        assert_eq!(bcs(&Box2D::new(60.0, 10.0, 90.0, 40.0), &crop).unwrap(), 1.0);
        assert_eq!(bcs(&Box2D::new(0.0, 0.0, 100.0, 100.0), &crop).unwrap(), 0.5);
        assert_eq!(bcs(&Box2D::new(0.0, 0.0, 40.0, 40.0), &crop).unwrap(), 0.0);
        assert!(matches!(
            bcs(&Box2D::new(5.0, 5.0, 5.0, 9.0), &crop),
            Err(MultisourceError::DegenerateBox)
        ));
    }

    #[test]
    fn grouping_examples() {
        let rig = twin_rig();
        let pair = &find_overlap_pairs(&rig)[0];
        let shared = |id: &str| ann(id, [10.0, 10.0, 20.0, 20.0]);
        let f = frame(
            vec![shared("p"), shared("q"), shared("r"), shared("solo")],
            vec![shared("r"), shared("q"), shared("p")],
        );
        let groups = find_redundant_groups(&rig, &f, pair);
        let ids: Vec<_> = groups.iter().map(|g| g.instance_id.as_str()).collect();
        assert_eq!(ids, ["p", "q", "r"]);
        assert!(groups.iter().all(|g| g.members.len() == 2));

        let f = frame(vec![shared("p")], vec![]);
        assert!(find_redundant_groups(&rig, &f, pair).is_empty());
    }

    #[test]
    fn rule_examples() {
        let g = RedundantGroup {
            instance_id: "x".into(),
            members: vec![member("A", 0.9), member("B", 0.6)],
        };
        let d = &apply_bcs_pruning(std::slice::from_ref(&g), 0.2)[0];
        assert_eq!(d.kept.len(), 1);
        assert_eq!(d.kept[0].camera, "A");
        assert_eq!(d.removed[0].camera, "B");

        let d = &apply_bcs_pruning(std::slice::from_ref(&g), 0.5)[0];
        assert_eq!((d.kept.len(), d.removed.len()), (2, 0));

        let extreme = RedundantGroup {
            instance_id: "x".into(),
            members: vec![member("A", 1.0), member("B", 0.0)],
        };
        let d = &apply_bcs_pruning(&[extreme], 1.0)[0];
        assert!(d.removed.is_empty());
    }

    #[test]
    fn tied_maxima_survive_together() {
        let g = RedundantGroup {
            instance_id: "x".into(),
            members: vec![member("A", 0.8), member("B", 0.8), member("A", 0.1)],
        };
        let d = &apply_bcs_pruning(&[g], 0.3)[0];
        assert_eq!(d.kept.len(), 2);
        assert_eq!(d.removed.len(), 1);
        assert_eq!(d.removed[0].bcs, 0.1);
    }

    fn manifest_with(frames: Vec<Frame>) -> DatasetManifest {
        DatasetManifest {
            rig: twin_rig(),
            frames,
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn prune_removes_exactly_the_less_complete_box() {
        // crop spans the whole 100px image, so a box half outside has BCS 0.5
        let pair = &find_overlap_pairs(&twin_rig())[0];
        assert!((pair.crop_a.col_hi - 100.0).abs() < 1e-9);
        let mut f = frame(vec![ann("x", [10.0, 10.0, 30.0, 30.0])], vec![ann("x", [10.0, 10.0, 30.0, 30.0])]);
        // shrink B's crop coverage by making its box straddle the image edge
        f.camera_views.get_mut("B").unwrap().annotations[0].bbox = Box2D::new(90.0, 10.0, 110.0, 30.0);
        let m = manifest_with(vec![f]);
        // 20x20 box with 10 columns inside -> BCS 0.5; spread 0.5 > 0.0
        let pruned = prune_dataset(&m, 0.0);
        assert_eq!(pruned.frames[0].annotation_count_2d(), 1);
        assert_eq!(pruned.frames[0].camera_views["B"].annotations.len(), 0);
        assert_eq!(pruned.meta["bcs_removed"], 1);
        assert_eq!(prune_dataset(&m, 0.6).frames, m.frames);
    }

    #[test]
    fn tau_one_and_empty_are_identity() {
        let f = frame(vec![ann("x", [0.0, 0.0, 50.0, 50.0])], vec![ann("x", [80.0, 0.0, 120.0, 40.0])]);
        let m = manifest_with(vec![f]);
        assert_eq!(prune_dataset(&m, 1.0).frames, m.frames);
        let empty = manifest_with(vec![frame(vec![], vec![])]);
        assert_eq!(prune_dataset(&empty, 0.0).frames, empty.frames);
    }

    #[test]
    fn sweep_removal_counts_follow_spreads() {
        // three groups with spreads 0.1, 0.3, 0.5
        let rig = twin_rig();
        let pair = &find_overlap_pairs(&rig)[0];
        let hi = pair.crop_b.col_hi;
        let straddle = |id: &str, visible: f64| {
            // 10px-wide box with `visible` fraction inside the image
            let x0 = hi - 10.0 * visible;
            ann(id, [x0, 0.0, x0 + 10.0, 10.0])
        };
        let full = |id: &str| ann(id, [10.0, 0.0, 20.0, 10.0]);
        let f = frame(
            vec![full("s1"), full("s3"), full("s5")],
            vec![straddle("s1", 0.9), straddle("s3", 0.7), straddle("s5", 0.5)],
        );
        let m = manifest_with(vec![f]);
        let taus = threshold_grid(0.0, 1.0, 0.2);
        assert_eq!(taus, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let removed: Vec<usize> = sweep_bcs(&m, &taus).unwrap().iter().map(|v| v.stats.removed).collect();
        assert_eq!(removed, [3, 2, 1, 0, 0, 0]);
        assert!(matches!(sweep_bcs(&m, &[0.5, 0.2]), Err(MultisourceError::UnsortedThresholds)));
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(threshold_grid(0.0, 1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(threshold_grid(0.3, 0.3, 0.1), [0.3]);
        assert_eq!(threshold_grid(0.0, 0.5, 0.2), [0.0, 0.2, 0.4]);
    }
}

//! Report assembly and plot-ready exports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_points, DatasetError, DatasetManifest, Point};
use crate::geometry::{find_overlap_pairs, IouMode, OverlapPair};
use crate::multimodal::{
    distance_ttest, redundancy_ratio, sweep_distance_frames, DetectionSet, DetectionSource, DistancePartition,
    FrameDetections, MultimodalError, PruneOutcome, RedundancyResult, RedundancySplit,
};
use crate::multisource::{crop_similarity, sweep_bcs, MultisourceError, RetentionStats};
use crate::stats::TTestResult;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Multisource(#[from] MultisourceError),
    #[error(transparent)]
    Multimodal(#[from] MultimodalError),
    #[error("detections reference frame `{0}`, which is not in the dataset")]
    UnknownFrame(String),
    #[error("frame `{0}` has more than one {1} detection set")]
    DuplicateFrame(String, &'static str),
    #[error("{path}: {message}")]
    Write { path: String, message: String },
}

/// Data-quality dimensions a finding can be filed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DqDimension {
    Completeness,
    Consistency,
    Correctness,
    NoiseLevel,
    Redundancy,
    Relevance,
    Timeliness,
}

impl DqDimension {
    pub const ALL: [DqDimension; 7] = [
        DqDimension::Completeness,
        DqDimension::Consistency,
        DqDimension::Correctness,
        DqDimension::NoiseLevel,
        DqDimension::Redundancy,
        DqDimension::Relevance,
        DqDimension::Timeliness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DqDimension::Completeness => "completeness",
            DqDimension::Consistency => "consistency",
            DqDimension::Correctness => "correctness",
            DqDimension::NoiseLevel => "noise_level",
            DqDimension::Redundancy => "redundancy",
            DqDimension::Relevance => "relevance",
            DqDimension::Timeliness => "timeliness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DqDimensionTag {
    pub dimension: DqDimension,
    pub note: String,
}

impl DqDimensionTag {
    pub fn new(dimension: DqDimension, note: impl Into<String>) -> Self {
        Self {
            dimension,
            note: note.into(),
        }
    }
}

/// One row per frame and camera pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub frame_id: String,
    pub pair: String,
    /// `None` when the frame has no images or a crop is blank.
    pub cosine: Option<f64>,
    pub has_redundant: bool,
    pub groups: usize,
    /// Annotations removed at each threshold of the sweep.
    pub removed: Vec<usize>,
}

/// Cosine similarity for one frame and pair, or `None` if there is nothing to
/// compare. Decode failures are errors.
fn pair_cosine(
    root: Option<&Path>,
    manifest: &DatasetManifest,
    frame_index: usize,
    pair: &OverlapPair,
) -> Result<Option<f64>, MultisourceError> {
    let Some(root) = root else { return Ok(None) };
    let frame = &manifest.frames[frame_index];
    match crop_similarity(root, &manifest.rig, frame, pair) {
        Ok(s) => Ok(Some(s.cosine)),
        Err(MultisourceError::MissingImage { .. } | MultisourceError::NotComparable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Pair rows for every frame (in manifest order) and pair (in key order),
/// plus the retention statistics of each threshold.
pub fn pair_rows(
    manifest: &DatasetManifest,
    root: Option<&Path>,
    taus: &[f64],
) -> Result<(Vec<PairRow>, Vec<RetentionStats>), MultisourceError> {
    use rayon::prelude::*;
    let pairs = find_overlap_pairs(&manifest.rig);
    let variants = sweep_bcs(manifest, taus)?;
    let cosines: Vec<Vec<Option<f64>>> = (0..manifest.frames.len())
        .into_par_iter()
        .map(|i| pairs.iter().map(|p| pair_cosine(root, manifest, i, p)).collect())
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, frame) in manifest.frames.iter().enumerate() {
        for (j, pair) in pairs.iter().enumerate() {
            let key = pair.key();
            let groups = variants
                .first()
                .map(|v| v.plans[i].per_pair[&key].0)
                .unwrap_or_else(|| crate::multisource::find_redundant_groups(&manifest.rig, frame, pair).len());
            rows.push(PairRow {
                frame_id: frame.frame_id.clone(),
                pair: key.clone(),
                cosine: cosines[i][j],
                has_redundant: groups > 0,
                groups,
                removed: variants.iter().map(|v| v.plans[i].per_pair[&key].1).collect(),
            });
        }
    }
    Ok((rows, variants.into_iter().map(|v| v.stats).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair: String,
    pub overlap_deg: f64,
    pub frames_compared: usize,
    pub mean_cosine: Option<f64>,
    /// Mean over frames where the pair shares at least one instance.
    pub mean_cosine_redundant: Option<f64>,
    pub mean_cosine_other: Option<f64>,
    pub frames_with_redundancy: usize,
    pub groups: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize_pairs(pairs: &[OverlapPair], rows: &[PairRow]) -> Vec<PairSummary> {
    pairs
        .iter()
        .map(|p| {
            let key = p.key();
            let mine: Vec<&PairRow> = rows.iter().filter(|r| r.pair == key).collect();
            PairSummary {
                overlap_deg: p.overlap.width(),
                frames_compared: mine.iter().filter(|r| r.cosine.is_some()).count(),
                mean_cosine: mean(mine.iter().filter_map(|r| r.cosine)),
                mean_cosine_redundant: mean(mine.iter().filter(|r| r.has_redundant).filter_map(|r| r.cosine)),
                mean_cosine_other: mean(mine.iter().filter(|r| !r.has_redundant).filter_map(|r| r.cosine)),
                frames_with_redundancy: mine.iter().filter(|r| r.has_redundant).count(),
                groups: mine.iter().map(|r| r.groups).sum(),
                pair: key,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSimilarityRow {
    pub frame_id: String,
    pub cosine: BTreeMap<String, Option<f64>>,
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBcsRow {
    pub frame_id: String,
    pub groups: usize,
    /// Removed annotations at each threshold.
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRrRow {
    pub frame_id: String,
    pub n_base: usize,
    pub n_lidar: usize,
    pub n_matched: usize,
    pub rr: Option<f64>,
}

impl From<&RedundancyResult> for FrameRrRow {
    fn from(r: &RedundancyResult) -> Self {
        Self {
            frame_id: r.frame_id.clone(),
            n_base: r.n_base,
            n_lidar: r.n_lidar,
            n_matched: r.n_matched(),
            rr: r.rr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySection {
    pub pairs: Vec<PairSummary>,
    pub frames: Vec<FrameSimilarityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcsSection {
    pub taus: Vec<f64>,
    pub sweep: Vec<RetentionStats>,
    pub frames: Vec<FrameBcsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestSection {
    /// Which grouping produced the samples.
    pub split: String,
    pub n_high: usize,
    pub n_low: usize,
    pub result: Option<TTestResult>,
    /// Why no result was produced.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSection {
    pub theta: f64,
    pub iou_mode: String,
    pub rr: Option<f64>,
    pub frames: Vec<FrameRrRow>,
    pub sweep: Vec<PruneOutcome>,
    /// Point counts in the sweep come from point-level pruning of the raw clouds.
    pub point_level: bool,
    pub ttest: TTestSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub dataset_id: String,
    pub seed: u64,
    pub frame_count: usize,
    pub similarity: SimilaritySection,
    pub bcs: BcsSection,
    pub multimodal: Option<MultimodalSection>,
    pub tags: Vec<DqDimensionTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub taus: Vec<f64>,
    pub theta: f64,
    pub iou_mode: IouMode,
    pub t_values: Vec<f64>,
    pub split: RedundancySplit,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            taus: crate::multisource::threshold_grid(0.0, 1.0, 0.2),
            theta: crate::multimodal::DEFAULT_THETA,
            iou_mode: IouMode::Rotated3d,
            t_values: vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0],
            split: RedundancySplit::PerBox,
            seed: 0,
        }
    }
}

pub struct DetectionInputs<'a> {
    pub base: &'a [DetectionSet],
    pub lidar: &'a [DetectionSet],
}

/// Detection sets aligned to the manifest's frame order; frames without a set
/// get an empty one.
pub fn align_detections(
    manifest: &DatasetManifest,
    sets: &[DetectionSet],
    source: DetectionSource,
) -> Result<Vec<DetectionSet>, ReportError> {
    let label = match source {
        DetectionSource::Base => "base",
        DetectionSource::LidarOnly => "lidar",
        DetectionSource::Pruned => "pruned",
    };
    let mut by_id: BTreeMap<&str, &DetectionSet> = BTreeMap::new();
    for s in sets {
        if manifest.frame(&s.frame_id).is_none() {
            return Err(ReportError::UnknownFrame(s.frame_id.clone()));
        }
        if by_id.insert(s.frame_id.as_str(), s).is_some() {
            return Err(ReportError::DuplicateFrame(s.frame_id.clone(), label));
        }
    }
    Ok(manifest
        .frames
        .iter()
        .map(|f| match by_id.get(f.frame_id.as_str()) {
            Some(s) => (*s).clone(),
            None => DetectionSet::empty(f.frame_id.clone(), source),
        })
        .collect())
}

/// Per-frame redundancy ratios in manifest order.
pub fn frame_ratios(
    base: &[DetectionSet],
    lidar: &[DetectionSet],
    theta: f64,
    mode: IouMode,
) -> Result<Vec<RedundancyResult>, MultimodalError> {
    use rayon::prelude::*;
    base.par_iter()
        .zip(lidar)
        .map(|(b, l)| redundancy_ratio(b, l, theta, mode))
        .collect()
}

pub fn pooled_rr(results: &[RedundancyResult]) -> Option<f64> {
    let n: usize = results.iter().map(|r| r.n_base).sum();
    let m: usize = results.iter().map(|r| r.n_matched()).sum();
    (n > 0).then(|| m as f64 / n as f64)
}

pub fn ttest_section(results: &[RedundancyResult], bases: &[DetectionSet], split: RedundancySplit) -> TTestSection {
    match distance_ttest(results, bases, split) {
        Ok((DistancePartition { high, low, .. }, t)) => TTestSection {
            split: split.label(),
            n_high: high.len(),
            n_low: low.len(),
            result: Some(t),
            error: None,
        },
        Err(e) => {
            let (n_high, n_low) = match &e {
                MultimodalError::DegeneratePartition { high, low } => (*high, *low),
                _ => crate::multimodal::distance_redundancy_groups(results, bases, split)
                    .map(|p| (p.high.len(), p.low.len()))
                    .unwrap_or((0, 0)),
            };
            TTestSection {
                split: split.label(),
                n_high,
                n_low,
                result: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Load every frame's point cloud, or `None` if any frame lacks one.
pub fn load_all_points(manifest: &DatasetManifest, root: &Path) -> Result<Option<Vec<Vec<Point>>>, DatasetError> {
    if manifest.frames.iter().any(|f| f.lidar_view.points_ref.is_none()) {
        return Ok(None);
    }
    manifest
        .frames
        .iter()
        .map(|f| load_points(root, &f.lidar_view))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn multimodal_section(
    manifest: &DatasetManifest,
    root: Option<&Path>,
    detections: &DetectionInputs<'_>,
    config: &ReportConfig,
) -> Result<MultimodalSection, ReportError> {
    let base = align_detections(manifest, detections.base, DetectionSource::Base)?;
    let lidar = align_detections(manifest, detections.lidar, DetectionSource::LidarOnly)?;
    let results = frame_ratios(&base, &lidar, config.theta, config.iou_mode)?;
    let points = match root {
        Some(r) => load_all_points(manifest, r)?,
        None => None,
    };
    let frames: Vec<FrameDetections<'_>> = base
        .iter()
        .zip(&lidar)
        .enumerate()
        .map(|(i, (b, l))| FrameDetections {
            base: b,
            lidar: l,
            points: points.as_ref().map(|p| p[i].as_slice()),
        })
        .collect();
    let sweep = sweep_distance_frames(&frames, &config.t_values, config.theta, config.iou_mode)?;
    Ok(MultimodalSection {
        theta: config.theta,
        iou_mode: match config.iou_mode {
            IouMode::Rotated3d => "rotated_3d".into(),
            IouMode::Bev => "bev".into(),
        },
        rr: pooled_rr(&results),
        frames: results.iter().map(FrameRrRow::from).collect(),
        sweep,
        point_level: points.is_some(),
        ttest: ttest_section(&results, &base, config.split),
    })
}

fn tags(has_multimodal: bool) -> Vec<DqDimensionTag> {
    let mut out = vec![
        DqDimensionTag::new(
            DqDimension::Redundancy,
            "cross-camera overlap: crop similarity and duplicated instances per camera pair",
        ),
        DqDimensionTag::new(
            DqDimension::Completeness,
            "duplicate annotations resolved by box completeness inside the overlap crop",
        ),
    ];
    if has_multimodal {
        out.push(DqDimensionTag::new(
            DqDimension::Redundancy,
            "camera/LiDAR: share of fused detections recovered by LiDAR alone",
        ));
        out.push(DqDimensionTag::new(
            DqDimension::Relevance,
            "near-range LiDAR pruning and the baseline detections it costs",
        ));
    }
    out
}

pub fn build_report(
    dataset_id: &str,
    manifest: &DatasetManifest,
    root: Option<&Path>,
    detections: Option<&DetectionInputs<'_>>,
    config: &ReportConfig,
) -> Result<RedundancyReport, ReportError> {
    let pairs = find_overlap_pairs(&manifest.rig);
    let (rows, sweep) = pair_rows(manifest, root, &config.taus)?;
    let per_frame = pairs.len();
    let mut sim_frames = Vec::with_capacity(manifest.frames.len());
    let mut bcs_frames = Vec::with_capacity(manifest.frames.len());
    for (i, frame) in manifest.frames.iter().enumerate() {
        let mine = &rows[i * per_frame..(i + 1) * per_frame];
        let groups = mine.iter().map(|r| r.groups).sum();
        sim_frames.push(FrameSimilarityRow {
            frame_id: frame.frame_id.clone(),
            cosine: mine.iter().map(|r| (r.pair.clone(), r.cosine)).collect(),
            groups,
        });
        bcs_frames.push(FrameBcsRow {
            frame_id: frame.frame_id.clone(),
            groups,
            removed: (0..config.taus.len()).map(|t| mine.iter().map(|r| r.removed[t]).sum()).collect(),
        });
    }
    let multimodal = detections
        .map(|d| multimodal_section(manifest, root, d, config))
        .transpose()?;
    Ok(RedundancyReport {
        dataset_id: dataset_id.to_string(),
        seed: config.seed,
        frame_count: manifest.frames.len(),
        similarity: SimilaritySection {
            pairs: summarize_pairs(&pairs, &rows),
            frames: sim_frames,
        },
        bcs: BcsSection {
            taus: config.taus.clone(),
            sweep,
            frames: bcs_frames,
        },
        tags: tags(multimodal.is_some()),
        multimodal,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_tau(tau: f64) -> String {
    format!("removed@{tau}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| write_err(path, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| write_err(path, e))
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<(), ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// `pair,cam_a,cam_b,overlap_deg,start_deg,end_deg,crop_a_lo,crop_a_hi,crop_b_lo,crop_b_hi`
pub fn write_overlap_table<W: std::io::Write>(out: W, pairs: &[OverlapPair]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pair", "cam_a", "cam_b", "overlap_deg", "start_deg", "end_deg", "crop_a_lo", "crop_a_hi", "crop_b_lo",
        "crop_b_hi",
    ])?;
    for p in pairs {
        w.write_record([
            p.key(),
            p.cam_a.clone(),
            p.cam_b.clone(),
            p.overlap.width().to_string(),
            p.overlap.start_deg.to_string(),
            p.overlap.end_deg.to_string(),
            p.crop_a.col_lo.to_string(),
            p.crop_a.col_hi.to_string(),
            p.crop_b.col_lo.to_string(),
            p.crop_b.col_hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `frame_id,pair,cosine,has_redundant,groups,removed@<tau>...`
pub fn write_pair_csv(path: &Path, rows: &[PairRow], taus: &[f64]) -> Result<(), ReportError> {
    let mut header: Vec<String> = ["frame_id", "pair", "cosine", "has_redundant", "groups"].map(String::from).into();
    header.extend(taus.iter().map(|&t| fmt_tau(t)));
    write_rows(
        path,
        header,
        rows.iter().map(|r| {
            let mut rec = vec![
                r.frame_id.clone(),
                r.pair.clone(),
                fmt_opt(r.cosine),
                r.has_redundant.to_string(),
                r.groups.to_string(),
            ];
            rec.extend(r.removed.iter().map(usize::to_string));
            rec
        }),
    )
}

/// `tau,groups,annotations_before,annotations_after,removed,<camera>...`,
/// camera columns holding retained annotation counts.
pub fn write_retention_csv(path: &Path, stats: &[RetentionStats]) -> Result<(), ReportError> {
    let cameras: Vec<String> = stats.first().map(|s| s.per_camera_after.keys().cloned().collect()).unwrap_or_default();
    let mut header: Vec<String> =
        ["tau", "groups", "annotations_before", "annotations_after", "removed"].map(String::from).into();
    header.extend(cameras.iter().cloned());
    write_rows(
        path,
        header,
        stats.iter().map(|s| {
            let mut rec = vec![
                s.tau.to_string(),
                s.groups.to_string(),
                s.annotations_before.to_string(),
                s.annotations_after.to_string(),
                s.removed.to_string(),
            ];
            rec.extend(cameras.iter().map(|c| s.per_camera_after.get(c).copied().unwrap_or(0).to_string()));
            rec
        }),
    )
}

/// `t_dist,boxes_retained,points_retained,lost_ratio,rr`
pub fn write_sweep_csv(path: &Path, outcomes: &[PruneOutcome]) -> Result<(), ReportError> {
    let header = ["t_dist", "boxes_retained", "points_retained", "lost_ratio", "rr"].map(String::from).into();
    write_rows(
        path,
        header,
        outcomes.iter().map(|o| {
            vec![
                o.t_dist.to_string(),
                o.boxes_retained.to_string(),
                o.points_retained.map(|p| p.to_string()).unwrap_or_default(),
                fmt_opt(o.lost_ratio),
                fmt_opt(o.rr),
            ]
        }),
    )
}

/// `frame_id,n_base,n_lidar,n_matched,rr`
pub fn write_rr_csv(path: &Path, rows: &[FrameRrRow]) -> Result<(), ReportError> {
    let header = ["frame_id", "n_base", "n_lidar", "n_matched", "rr"].map(String::from).into();
    write_rows(
        path,
        header,
        rows.iter().map(|r| {
            vec![
                r.frame_id.clone(),
                r.n_base.to_string(),
                r.n_lidar.to_string(),
                r.n_matched.to_string(),
                fmt_opt(r.rr),
            ]
        }),
    )
}

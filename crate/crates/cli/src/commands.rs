use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dq_core::dataset::{
    dataset_root, export_dataset, load_manifest, load_rig, write_points, DatasetError, DatasetManifest, SensorRig,
};
use dq_core::geometry::{find_overlap_pairs, IouMode};
use dq_core::json;
use dq_core::multimodal::{
    prune_detections_by_distance, prune_points_by_distance, read_detection_sets, sweep_distance_frames,
    write_detection_sets, DetectionSet, DetectionSource, FrameDetections, MultimodalError, RedundancySplit,
};
use dq_core::multisource::{sweep_bcs, threshold_grid, MultisourceError};
use dq_core::report::{
    align_detections, build_report, frame_ratios, load_all_points, pair_rows, pooled_rr, ttest_section,
    write_overlap_table, write_pair_csv, write_retention_csv, write_rr_csv, write_sweep_csv, DetectionInputs,
    FrameRrRow, ReportConfig, ReportError,
};
use dq_core::synth::{generate_synthetic, SynthError, SynthSpec, BASE_DETECTIONS_FILE, LIDAR_DETECTIONS_FILE};

use crate::{Command, DetectionArgs, SynthArgs, TauArgs};

/// Malformed command-line values.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Well-formed inputs that break a rule.
#[derive(Debug)]
struct InvalidInput(String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

const VALIDATION: u8 = 1;
const PARSE_OR_IO: u8 = 2;

fn dataset_code(e: &DatasetError) -> u8 {
    match e {
        DatasetError::Validation(_) => VALIDATION,
        _ => PARSE_OR_IO,
    }
}

fn multimodal_code(e: &MultimodalError) -> u8 {
    match e {
        MultimodalError::Io { .. } | MultimodalError::Parse { .. } => PARSE_OR_IO,
        _ => VALIDATION,
    }
}

fn multisource_code(e: &MultisourceError) -> u8 {
    match e {
        MultisourceError::Decode { .. } | MultisourceError::MissingImage { .. } => PARSE_OR_IO,
        _ => VALIDATION,
    }
}

/// 1 for validation failures, 2 for parse and I/O failures.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return dataset_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MultimodalError>() {
            return multimodal_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MultisourceError>() {
            return multisource_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ReportError>() {
            return match e {
                ReportError::Dataset(d) => dataset_code(d),
                ReportError::Multisource(m) => multisource_code(m),
                ReportError::Multimodal(m) => multimodal_code(m),
                ReportError::UnknownFrame(_) | ReportError::DuplicateFrame(..) => VALIDATION,
                ReportError::Write { .. } => PARSE_OR_IO,
            };
        }
        if let Some(e) = cause.downcast_ref::<SynthError>() {
            return match e {
                SynthError::Spec(_) => VALIDATION,
                SynthError::Dataset(d) => dataset_code(d),
                SynthError::Detections(m) => multimodal_code(m),
                SynthError::Io { .. } => PARSE_OR_IO,
            };
        }
        if cause.is::<InvalidInput>() {
            return VALIDATION;
        }
    }
    PARSE_OR_IO
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Pairs { rig, dataset, out } => cmd_pairs(rig, dataset, out),
        Command::Similarity {
            dataset,
            pair,
            taus,
            out,
        } => cmd_similarity(&dataset, pair.as_deref(), &taus, &out),
        Command::PruneBcs { dataset, taus, out } => cmd_prune_bcs(&dataset, &taus, &out),
        Command::MmRedundancy { det, out } => cmd_mm_redundancy(&det, &out),
        Command::PruneDistance {
            det,
            t_dist,
            sweep,
            out,
        } => cmd_prune_distance(&det, t_dist, sweep.as_deref(), &out),
        Command::Ttest { det, split, out } => cmd_ttest(&det, &split, out.as_deref()),
        Command::Report {
            det,
            taus,
            t_sweep,
            split,
            seed,
            out,
        } => cmd_report(&det, &taus, &t_sweep, &split, seed, &out),
        Command::Synth(args) => cmd_synth(&args),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("{what}: `{s}` is not a number")))
}

/// `lo:hi:step` into an inclusive grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(usage(format!("grid `{spec}` must be lo:hi:step")));
    };
    let (lo, hi, step) = (parse_f64(lo, "grid")?, parse_f64(hi, "grid")?, parse_f64(step, "grid")?);
    if !(step > 0.0) || hi < lo {
        return Err(usage(format!("grid `{spec}` needs lo <= hi and step > 0")));
    }
    Ok(threshold_grid(lo, hi, step))
}

fn parse_pair(spec: &str, what: &str) -> Result<(f64, f64)> {
    let Some((a, b)) = spec.split_once(':') else {
        return Err(usage(format!("{what} `{spec}` must be lo:hi")));
    };
    Ok((parse_f64(a, what)?, parse_f64(b, what)?))
}

fn parse_split(spec: &str) -> Result<RedundancySplit> {
    match spec.split_once(':') {
        None if spec == "per-box" => Ok(RedundancySplit::PerBox),
        Some(("frame-threshold", v)) => Ok(RedundancySplit::FrameRrThreshold {
            threshold: parse_f64(v, "split")?,
        }),
        Some(("frame-quantile", v)) => Ok(RedundancySplit::FrameRrQuantile {
            q: parse_f64(v, "split")?,
        }),
        _ => Err(usage(format!(
            "split `{spec}` must be per-box, frame-threshold:<rr> or frame-quantile:<q>"
        ))),
    }
}

fn taus(args: &TauArgs) -> Result<Vec<f64>> {
    match (args.tau, &args.sweep) {
        (Some(t), _) => Ok(vec![t]),
        (None, Some(s)) => parse_grid(s),
        (None, None) => Ok(threshold_grid(0.0, 1.0, 0.2)),
    }
}

fn iou_mode(det: &DetectionArgs) -> IouMode {
    if det.bev {
        IouMode::Bev
    } else {
        IouMode::Rotated3d
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_pairs(rig: Option<PathBuf>, dataset: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let rig: SensorRig = match (rig, dataset) {
        (Some(r), _) => load_rig(&r)?,
        (None, Some(d)) => load_manifest(&d)?.rig,
        (None, None) => return Err(usage("pass --rig or --dataset")),
    };
    let pairs = find_overlap_pairs(&rig);
    let mut buf = Vec::new();
    write_overlap_table(&mut buf, &pairs)?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    print!("{text}");
    if let Some(out) = out {
        write_file(&out, &text)?;
    }
    Ok(())
}

fn cmd_similarity(dataset: &Path, pair: Option<&str>, taus_args: &TauArgs, out: &Path) -> Result<()> {
    let m = load_manifest(dataset)?;
    let root = dataset_root(dataset);
    if let Some(p) = pair {
        if !find_overlap_pairs(&m.rig).iter().any(|op| op.key() == p) {
            return Err(InvalidInput(format!("`{p}` is not an overlapping pair of this rig")).into());
        }
    }
    let taus = taus(taus_args)?;
    let (rows, _) = pair_rows(&m, Some(&root), &taus)?;
    let rows: Vec<_> = rows.into_iter().filter(|r| pair.is_none_or(|p| r.pair == p)).collect();
    write_pair_csv(out, &rows, &taus)?;
    log::info!("{} rows written to {}", rows.len(), out.display());
    Ok(())
}

fn tau_dir(tau: f64) -> String {
    format!("tau_{tau}")
}

fn cmd_prune_bcs(dataset: &Path, taus_args: &TauArgs, out: &Path) -> Result<()> {
    let m = load_manifest(dataset)?;
    let root = dataset_root(dataset);
    let taus = taus(taus_args)?;
    let variants = sweep_bcs(&m, &taus)?;
    for v in &variants {
        let dir = out.join(tau_dir(v.tau));
        export_dataset(&v.manifest, &root, &dir)?;
        println!("tau={} removed={} retained={}", v.tau, v.stats.removed, v.stats.annotations_after);
    }
    let stats: Vec<_> = variants.into_iter().map(|v| v.stats).collect();
    write_retention_csv(&out.join("retention.csv"), &stats)?;
    let (rows, _) = pair_rows(&m, None, &taus)?;
    write_pair_csv(&out.join("pairs.csv"), &rows, &taus)?;
    Ok(())
}

/// Detection inputs aligned to a common frame order.
struct LoadedDetections {
    manifest: Option<(DatasetManifest, PathBuf)>,
    base: Vec<DetectionSet>,
    lidar: Vec<DetectionSet>,
}

fn detection_path(explicit: &Option<PathBuf>, dataset: Option<&Path>, default: &str, flag: &str) -> Result<PathBuf> {
    match (explicit, dataset) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(dataset_root(d).join(default)),
        (None, None) => Err(usage(format!("pass --{flag} or --dataset"))),
    }
}

/// Align sets by frame id when no manifest fixes the order: baseline order
/// first, then frames only the LiDAR file mentions.
fn align_loose(base: Vec<DetectionSet>, lidar: Vec<DetectionSet>) -> Result<(Vec<DetectionSet>, Vec<DetectionSet>)> {
    let mut order: Vec<String> = Vec::new();
    let mut b: BTreeMap<String, DetectionSet> = BTreeMap::new();
    let mut l: BTreeMap<String, DetectionSet> = BTreeMap::new();
    for s in base {
        if b.contains_key(&s.frame_id) {
            return Err(ReportError::DuplicateFrame(s.frame_id, "base").into());
        }
        order.push(s.frame_id.clone());
        b.insert(s.frame_id.clone(), s);
    }
    for s in lidar {
        if l.contains_key(&s.frame_id) {
            return Err(ReportError::DuplicateFrame(s.frame_id, "lidar").into());
        }
        if !b.contains_key(&s.frame_id) {
            order.push(s.frame_id.clone());
        }
        l.insert(s.frame_id.clone(), s);
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let base = b.remove(&id).unwrap_or_else(|| DetectionSet::empty(id.clone(), DetectionSource::Base));
            let lidar = l.remove(&id).unwrap_or_else(|| DetectionSet::empty(id, DetectionSource::LidarOnly));
            (base, lidar)
        })
        .unzip())
}

fn load_detections(det: &DetectionArgs) -> Result<LoadedDetections> {
    let base_path = detection_path(&det.base, det.dataset.as_deref(), BASE_DETECTIONS_FILE, "base")?;
    let lidar_path = detection_path(&det.lidar, det.dataset.as_deref(), LIDAR_DETECTIONS_FILE, "lidar")?;
    let base = read_detection_sets(&base_path)?;
    let lidar = read_detection_sets(&lidar_path)?;
    match &det.dataset {
        Some(d) => {
            let m = load_manifest(d)?;
            let base = align_detections(&m, &base, DetectionSource::Base)?;
            let lidar = align_detections(&m, &lidar, DetectionSource::LidarOnly)?;
            Ok(LoadedDetections {
                manifest: Some((m, dataset_root(d))),
                base,
                lidar,
            })
        }
        None => {
            let (base, lidar) = align_loose(base, lidar)?;
            Ok(LoadedDetections {
                manifest: None,
                base,
                lidar,
            })
        }
    }
}

fn cmd_mm_redundancy(det: &DetectionArgs, out: &Path) -> Result<()> {
    let loaded = load_detections(det)?;
    let results = frame_ratios(&loaded.base, &loaded.lidar, det.theta, iou_mode(det))?;
    let rows: Vec<FrameRrRow> = results.iter().map(FrameRrRow::from).collect();
    write_rr_csv(out, &rows)?;
    match pooled_rr(&results) {
        Some(rr) => println!("rr={rr:.4} frames={} theta={}", rows.len(), det.theta),
        None => println!("rr=undefined frames={} theta={}", rows.len(), det.theta),
    }
    Ok(())
}

fn cmd_prune_distance(det: &DetectionArgs, t_dist: Option<f64>, sweep: Option<&str>, out: &Path) -> Result<()> {
    let t_values = match (t_dist, sweep) {
        (Some(t), _) => vec![t],
        (None, Some(s)) => parse_grid(s)?,
        (None, None) => return Err(usage("pass --t-dist or --sweep")),
    };
    let loaded = load_detections(det)?;
    let points = match &loaded.manifest {
        Some((m, root)) => load_all_points(m, root)?,
        None => None,
    };
    let frames: Vec<FrameDetections<'_>> = loaded
        .base
        .iter()
        .zip(&loaded.lidar)
        .enumerate()
        .map(|(i, (base, lidar))| FrameDetections {
            base,
            lidar,
            points: points.as_ref().map(|p| p[i].as_slice()),
        })
        .collect();
    let outcomes = sweep_distance_frames(&frames, &t_values, det.theta, iou_mode(det))?;
    write_sweep_csv(&out.join("sweep.csv"), &outcomes)?;
    for o in &outcomes {
        println!(
            "t_dist={} boxes_retained={} lost_ratio={} rr={}",
            o.t_dist,
            o.boxes_retained,
            o.lost_ratio.map_or("undefined".into(), |v| format!("{v:.4}")),
            o.rr.map_or("undefined".into(), |v| format!("{v:.4}")),
        );
    }
    let Some(t) = t_dist else { return Ok(()) };
    let pruned_lidar: Vec<DetectionSet> = loaded
        .lidar
        .iter()
        .map(|s| DetectionSet {
            source: s.source,
            ..prune_detections_by_distance(s, t)
        })
        .collect();
    let Some((m, root)) = &loaded.manifest else {
        write_detection_sets(&out.join("lidar_pruned.jsonl"), &pruned_lidar)?;
        return Ok(());
    };
    let dir = out.join("dataset");
    let mut pruned = m.clone();
    for f in &mut pruned.frames {
        f.lidar_view.annotations.retain(|a| dq_core::geometry::centroid_distance(&a.bbox) >= t);
    }
    pruned.meta.insert("distance_t".into(), serde_json::json!(t));
    export_dataset(&pruned, root, &dir)?;
    if let Some(points) = &points {
        for (f, pts) in pruned.frames.iter().zip(points) {
            let rel = f.lidar_view.points_ref.as_ref().expect("points present for every frame");
            let dst = dir.join(rel);
            // the exported file may be a hard link to the source
            std::fs::remove_file(&dst).with_context(|| format!("replacing {}", dst.display()))?;
            write_points(&dst, &prune_points_by_distance(pts, t))?;
        }
    }
    write_detection_sets(&dir.join(BASE_DETECTIONS_FILE), &loaded.base)?;
    write_detection_sets(&dir.join(LIDAR_DETECTIONS_FILE), &pruned_lidar)?;
    Ok(())
}

fn cmd_ttest(det: &DetectionArgs, split: &str, out: Option<&Path>) -> Result<()> {
    let split = parse_split(split)?;
    let loaded = load_detections(det)?;
    let results = frame_ratios(&loaded.base, &loaded.lidar, det.theta, iou_mode(det))?;
    let section = ttest_section(&results, &loaded.base, split);
    let text = json::to_canonical_pretty(&section)?;
    match out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(err) = &section.error {
        return Err(InvalidInput(format!("t-test not computed: {err}")).into());
    }
    Ok(())
}

fn cmd_report(det: &DetectionArgs, taus_args: &TauArgs, t_sweep: &str, split: &str, seed: u64, out: &Path) -> Result<()> {
    let Some(dataset) = &det.dataset else {
        return Err(usage("report needs --dataset"));
    };
    let m = load_manifest(dataset)?;
    let root = dataset_root(dataset);
    let config = ReportConfig {
        taus: taus(taus_args)?,
        theta: det.theta,
        iou_mode: iou_mode(det),
        t_values: parse_grid(t_sweep)?,
        split: parse_split(split)?,
        seed,
    };
    let base_path = detection_path(&det.base, Some(dataset), BASE_DETECTIONS_FILE, "base")?;
    let lidar_path = detection_path(&det.lidar, Some(dataset), LIDAR_DETECTIONS_FILE, "lidar")?;
    let explicit = det.base.is_some() || det.lidar.is_some();
    let sets = if explicit || (base_path.exists() && lidar_path.exists()) {
        Some((read_detection_sets(&base_path)?, read_detection_sets(&lidar_path)?))
    } else {
        log::info!("no detection files; multimodal section omitted");
        None
    };
    let inputs = sets.as_ref().map(|(base, lidar)| DetectionInputs { base, lidar });
    let dataset_id = match m.meta.get("dataset_id").and_then(|v| v.as_str()) {
        Some(id) => id.to_string(),
        None => root
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into()),
    };
    let report = build_report(&dataset_id, &m, Some(&root), inputs.as_ref(), &config)?;
    write_file(out, &json::to_canonical_pretty(&report)?)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (lo, hi) = parse_pair(&args.objects, "objects")?;
    if lo < 0.0 || hi < 0.0 || lo.fract() != 0.0 || hi.fract() != 0.0 {
        return Err(usage(format!("objects `{}` must be two whole numbers", args.objects)));
    }
    let rig = match &args.rig {
        Some(p) => load_rig(p)?,
        None => SensorRig::nuscenes_like(args.width, args.height),
    };
    let spec = SynthSpec {
        seed: args.seed,
        frames: args.frames,
        objects: (lo as usize, hi as usize),
        distance_m: parse_pair(&args.distance, "distance")?,
        shared_prob: args.shared_prob,
        render_images: args.images,
        rig,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec)?;
    data.write(&args.out)?;
    let shared: usize = data.truth.frames.iter().map(|f| f.shared_count()).sum();
    let objects: usize = data.truth.frames.iter().map(|f| f.instances.len()).sum();
    println!(
        "wrote {} frames, {objects} objects ({shared} shared) to {}",
        spec.frames,
        args.out.display()
    );
    Ok(())
}

//! Deterministic synthetic scenes.
//!
//! Objects are placed in the ego frame around the rig. A shared object sits
//! inside the FoV overlap wedge of one camera pair and is annotated in both
//! cameras; an unshared object sits where exactly one camera sees it. Every
//! object becomes a LiDAR annotation and a perfect baseline detection; the
//! LiDAR-only detector finds each object with a probability that falls with
//! distance. The generator records what it did so tests can compare pipeline
//! output against it.

use std::collections::BTreeMap;
use std::path::Path;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_manifest, write_points, Annotation2D, Annotation3D, CameraSpec, CameraView, DatasetError, DatasetManifest,
    Frame, LidarView, Point, SensorRig,
};
use crate::geometry::{
    angle_to_column, column_to_angle, find_overlap_pairs, fov_interval, normalize_deg, project_column, AngularInterval,
    Box2D, Box3D,
};
use crate::json;
use crate::multimodal::{write_detection_sets, Detection, DetectionSet, DetectionSource, MultimodalError};

/// Clearance (degrees) kept between an object's bearing and any FoV edge.
const EDGE_MARGIN_DEG: f64 = 1.0;
/// Free space (metres) between object footprints.
const FOOTPRINT_GAP_M: f64 = 0.5;
const SENSOR_HEIGHT_M: f64 = 1.8;
const PLACEMENT_TRIES: usize = 200;

pub const BASE_DETECTIONS_FILE: &str = "detections/base.jsonl";
pub const LIDAR_DETECTIONS_FILE: &str = "detections/lidar.jsonl";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Detections(#[from] MultimodalError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    /// Inclusive range of objects per frame.
    pub objects: (usize, usize),
    /// Horizontal distance range of object centres, metres.
    pub distance_m: (f64, f64),
    /// Probability that an object is placed in an overlap wedge.
    pub shared_prob: f64,
    /// LiDAR-only detection probability at the near and far ends of `distance_m`.
    pub detect_prob: (f64, f64),
    pub ground_points: usize,
    pub render_images: bool,
    pub rig: SensorRig,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 10,
            objects: (2, 8),
            distance_m: (3.0, 50.0),
            shared_prob: 0.3,
            detect_prob: (0.95, 0.2),
            ground_points: 256,
            render_images: false,
            rig: SensorRig::nuscenes_like(320, 180),
        }
    }
}

impl SynthSpec {
    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.shared_prob) {
            return bad(format!("shared_prob {} outside [0, 1]", self.shared_prob));
        }
        if !prob(self.detect_prob.0) || !prob(self.detect_prob.1) {
            return bad(format!("detect_prob {:?} outside [0, 1]", self.detect_prob));
        }
        let (lo, hi) = self.distance_m;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("distance range ({lo}, {hi}) needs 0 < min < max"));
        }
        if self.objects.0 > self.objects.1 {
            return bad(format!("object range {:?} is reversed", self.objects));
        }
        if self.rig.cameras.is_empty() {
            return bad("rig has no cameras".into());
        }
        let mut errs = Vec::new();
        self.rig.check(&mut errs);
        if !errs.is_empty() {
            return bad(errs.join("; "));
        }
        Ok(())
    }

    fn detect_probability(&self, dist: f64) -> f64 {
        let (lo, hi) = self.distance_m;
        let s = ((dist - lo) / (hi - lo)).clamp(0.0, 1.0);
        self.detect_prob.0 + (self.detect_prob.1 - self.detect_prob.0) * s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceTruth {
    pub instance_id: String,
    pub category: String,
    /// Centroid distance from the sensor origin.
    pub distance_m: f64,
    pub azimuth_deg: f64,
    /// Cameras the object is annotated in.
    pub cameras: Vec<String>,
    /// Overlap pair key when the object was placed in a wedge.
    pub shared_pair: Option<String>,
    /// Whether the LiDAR-only detector reports it.
    pub detected: bool,
    /// Grey level used when rendering.
    pub shade: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_id: String,
    pub instances: Vec<InstanceTruth>,
    /// Instance ids per overlap pair key, for every pair of the rig.
    pub shared: BTreeMap<String, Vec<String>>,
    pub n_detected: usize,
    /// Fraction of baseline boxes the LiDAR-only set recovers.
    pub rr: Option<f64>,
}

impl FrameTruth {
    pub fn shared_count(&self) -> usize {
        self.shared.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub frames: Vec<FrameTruth>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    pub base: Vec<DetectionSet>,
    pub lidar: Vec<DetectionSet>,
    pub points: Vec<Vec<Point>>,
    pub truth: SynthTruth,
}

struct Category {
    name: &'static str,
    weight: f64,
    w: (f64, f64),
    l: (f64, f64),
    h: (f64, f64),
}

const CATEGORIES: [Category; 3] = [
    Category {
        name: "car",
        weight: 0.6,
        w: (1.7, 2.0),
        l: (4.0, 4.8),
        h: (1.4, 1.7),
    },
    Category {
        name: "truck",
        weight: 0.15,
        w: (2.3, 2.6),
        l: (6.0, 9.0),
        h: (2.5, 3.5),
    },
    Category {
        name: "pedestrian",
        weight: 0.25,
        w: (0.5, 0.8),
        l: (0.5, 0.8),
        h: (1.6, 1.9),
    },
];

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn pick_category(rng: &mut ChaCha8Rng) -> &'static Category {
    let mut u = rng.random::<f64>();
    for c in &CATEGORIES {
        if u < c.weight {
            return c;
        }
        u -= c.weight;
    }
    &CATEGORIES[0]
}

/// Azimuth range with `margin` trimmed from both ends, if anything is left.
fn shrink(arc: &AngularInterval, margin: f64) -> Option<(f64, f64)> {
    let w = arc.width() - 2.0 * margin;
    (w > 0.0).then_some((arc.start_deg + margin, w))
}

struct Layout {
    fovs: Vec<AngularInterval>,
    /// (pair key, azimuth start, usable width)
    wedges: Vec<(String, f64, f64)>,
}

impl Layout {
    fn new(rig: &SensorRig) -> Self {
        let wedges = find_overlap_pairs(rig)
            .iter()
            .filter_map(|p| shrink(&p.overlap, EDGE_MARGIN_DEG).map(|(s, w)| (p.key(), s, w)))
            .collect();
        Self {
            fovs: rig.cameras.iter().map(fov_interval).collect(),
            wedges,
        }
    }

    /// Cameras whose FoV holds `az` with the edge margin.
    fn seen_by(&self, az: f64) -> Vec<usize> {
        self.fovs
            .iter()
            .enumerate()
            .filter(|(_, f)| shrink(f, EDGE_MARGIN_DEG).is_some_and(|(s, w)| normalize_deg(az - s).rem_euclid(360.0) < w))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether `az` is within the margin of any FoV edge.
    fn near_edge(&self, az: f64) -> bool {
        self.fovs.iter().any(|f| {
            let d0 = normalize_deg(az - f.start_deg).abs();
            let d1 = normalize_deg(az - f.end_deg).abs();
            d0.min(d1) < EDGE_MARGIN_DEG
        })
    }

    fn sample_shared(&self, rng: &mut ChaCha8Rng) -> Option<(f64, String)> {
        if self.wedges.is_empty() {
            return None;
        }
        let (key, start, width) = &self.wedges[rng.random_range(0..self.wedges.len())];
        Some((normalize_deg(start + width * rng.random::<f64>()), key.clone()))
    }

    fn sample_unshared(&self, rng: &mut ChaCha8Rng) -> Option<f64> {
        for _ in 0..PLACEMENT_TRIES {
            let f = &self.fovs[rng.random_range(0..self.fovs.len())];
            let az = normalize_deg(f.start_deg + f.width() * rng.random::<f64>());
            if !self.near_edge(az) && self.seen_by(az).len() == 1 {
                return Some(az);
            }
        }
        None
    }
}

struct Placed {
    truth: InstanceTruth,
    bbox: Box3D,
    radius: f64,
}

fn footprint_radius(b: &Box3D) -> f64 {
    0.5 * b.width().hypot(b.length())
}

/// 2D box of `b` seen by `cam`: centred on the bearing's column, sized by the
/// apparent-size model `fx * extent / range`, clamped to the image.
fn project_box(cam: &CameraSpec, b: &Box3D, az: f64, range: f64) -> Option<Box2D> {
    let rel = normalize_deg(az - cam.yaw_deg);
    angle_to_column(cam, rel).ok()?;
    let col = project_column(cam, rel);
    let half_w = 0.5 * cam.fx * b.width().max(b.length()) / range;
    let half_h = 0.5 * cam.fx * b.height() / range;
    let cy = f64::from(cam.height_px) / 2.0;
    let full = Box2D::new(col - half_w, cy - half_h, col + half_w, cy + half_h);
    let clamped = full.clamped_to(f64::from(cam.width_px), f64::from(cam.height_px));
    (clamped.area() > 0.0).then_some(clamped)
}

fn jitter(rng: &mut ChaCha8Rng, b: &Box3D) -> Box3D {
    // small enough that the jittered box keeps IoU > 0.5 with the original
    let step = 0.05 * b.width().min(b.length());
    let mut out = *b;
    out.center[0] += step * (2.0 * rng.random::<f64>() - 1.0);
    out.center[1] += step * (2.0 * rng.random::<f64>() - 1.0);
    for s in &mut out.size {
        *s *= 1.0 + 0.03 * (2.0 * rng.random::<f64>() - 1.0);
    }
    out.yaw += 0.03 * (2.0 * rng.random::<f64>() - 1.0);
    out
}

fn object_points(rng: &mut ChaCha8Rng, b: &Box3D, dist: f64) -> Vec<Point> {
    let n = 5 + (2000.0 / (dist * dist)).min(200.0) as usize;
    let (s, c) = b.yaw.sin_cos();
    (0..n)
        .map(|_| {
            let u = (rng.random::<f64>() - 0.5) * b.length();
            let v = (rng.random::<f64>() - 0.5) * b.width();
            let t = (rng.random::<f64>() - 0.5) * b.height();
            Point::new(
                (b.center[0] + c * u - s * v) as f32,
                (b.center[1] + s * u + c * v) as f32,
                (b.center[2] + t) as f32,
                rng.random::<f32>(),
            )
        })
        .collect()
}

struct FrameOut {
    frame: Frame,
    base: DetectionSet,
    lidar: DetectionSet,
    points: Vec<Point>,
    truth: FrameTruth,
}

fn generate_frame(spec: &SynthSpec, layout: &Layout, index: usize) -> FrameOut {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let frame_id = format!("frame-{index:05}");
    let rig = &spec.rig;

    let n_objects = rng.random_range(spec.objects.0..=spec.objects.1);
    let mut placed: Vec<Placed> = Vec::new();
    for k in 0..n_objects {
        let shared = rng.random_bool(spec.shared_prob);
        let slot = if shared {
            layout.sample_shared(&mut rng).map(|(az, key)| (az, Some(key)))
        } else {
            None
        };
        let Some((az, pair)) = slot.or_else(|| layout.sample_unshared(&mut rng).map(|az| (az, None))) else {
            continue;
        };
        let cat = pick_category(&mut rng);
        let size = [uniform(&mut rng, cat.w), uniform(&mut rng, cat.l), uniform(&mut rng, cat.h)];
        let yaw = uniform(&mut rng, (-std::f64::consts::PI, std::f64::consts::PI));
        let shade = rng.random_range(10..=245u8);
        let mut spot = None;
        for _ in 0..PLACEMENT_TRIES {
            let d = uniform(&mut rng, spec.distance_m);
            let (s, c) = az.to_radians().sin_cos();
            let b = Box3D::new([d * c, d * s, size[2] / 2.0 - SENSOR_HEIGHT_M], size, yaw);
            let r = footprint_radius(&b);
            let clear = placed.iter().all(|p| {
                let gap = (p.bbox.center[0] - b.center[0]).hypot(p.bbox.center[1] - b.center[1]);
                gap > p.radius + r + FOOTPRINT_GAP_M
            });
            if clear {
                spot = Some((b, r));
                break;
            }
        }
        let Some((bbox, radius)) = spot else { continue };
        let cameras: Vec<String> = layout.seen_by(az).into_iter().map(|i| rig.cameras[i].name.clone()).collect();
        let distance_m = crate::geometry::centroid_distance(&bbox);
        placed.push(Placed {
            truth: InstanceTruth {
                instance_id: format!("{frame_id}-obj{k:02}"),
                category: cat.name.to_string(),
                distance_m,
                azimuth_deg: az,
                cameras,
                shared_pair: pair,
                detected: false,
                shade,
            },
            bbox,
            radius,
        });
    }

    let mut camera_views: BTreeMap<String, CameraView> = rig
        .cameras
        .iter()
        .map(|c| {
            let image_ref = spec.render_images.then(|| format!("images/{}/{frame_id}.png", c.name));
            (
                c.name.clone(),
                CameraView {
                    image_ref,
                    annotations: Vec::new(),
                },
            )
        })
        .collect();
    let mut lidar_annotations = Vec::new();
    let mut base_boxes = Vec::new();
    let mut lidar_boxes = Vec::new();
    let mut points = Vec::new();
    let mut shared: BTreeMap<String, Vec<String>> = find_overlap_pairs(rig).iter().map(|p| (p.key(), Vec::new())).collect();

    for p in &mut placed {
        let t = &mut p.truth;
        let range = t.distance_m;
        t.cameras.retain(|name| {
            let cam = rig.camera(name).expect("camera from rig");
            match project_box(cam, &p.bbox, t.azimuth_deg, range) {
                Some(bbox) => {
                    camera_views.get_mut(name).expect("view per camera").annotations.push(Annotation2D {
                        instance_id: t.instance_id.clone(),
                        category: t.category.clone(),
                        bbox,
                    });
                    true
                }
                None => false,
            }
        });
        if let Some(key) = &t.shared_pair {
            shared.get_mut(key).expect("pair key from rig").push(t.instance_id.clone());
        }
        lidar_annotations.push(Annotation3D {
            instance_id: t.instance_id.clone(),
            category: t.category.clone(),
            bbox: p.bbox,
        });
        base_boxes.push(Detection {
            bbox: p.bbox,
            score: Some(1.0),
            category: Some(t.category.clone()),
        });
        t.detected = rng.random_bool(spec.detect_probability(range));
        if t.detected {
            lidar_boxes.push(Detection {
                bbox: jitter(&mut rng, &p.bbox),
                score: Some((0.5 + 0.5 * rng.random::<f64>()).min(1.0)),
                category: Some(t.category.clone()),
            });
        }
        points.extend(object_points(&mut rng, &p.bbox, range));
    }
    for _ in 0..spec.ground_points {
        let r = uniform(&mut rng, (1.0, spec.distance_m.1));
        let a = uniform(&mut rng, (-std::f64::consts::PI, std::f64::consts::PI));
        points.push(Point::new(
            (r * a.cos()) as f32,
            (r * a.sin()) as f32,
            -SENSOR_HEIGHT_M as f32,
            rng.random::<f32>(),
        ));
    }
    for ids in shared.values_mut() {
        ids.sort();
    }

    let instances: Vec<InstanceTruth> = placed.into_iter().map(|p| p.truth).collect();
    let n_detected = instances.iter().filter(|t| t.detected).count();
    let truth = FrameTruth {
        frame_id: frame_id.clone(),
        rr: (!instances.is_empty()).then(|| n_detected as f64 / instances.len() as f64),
        n_detected,
        shared,
        instances,
    };
    FrameOut {
        frame: Frame {
            frame_id: frame_id.clone(),
            timestamp_us: index as i64 * 500_000,
            camera_views,
            lidar_view: LidarView {
                points_ref: Some(format!("points/{frame_id}.bin")),
                annotations: lidar_annotations,
            },
        },
        base: DetectionSet::new(frame_id.clone(), DetectionSource::Base, base_boxes),
        lidar: DetectionSet::new(frame_id, DetectionSource::LidarOnly, lidar_boxes),
        points,
        truth,
    }
}

/// Generate a dataset; output depends only on `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDataset, SynthError> {
    spec.check()?;
    let layout = Layout::new(&spec.rig);
    let frames: Vec<FrameOut> = (0..spec.frames).into_par_iter().map(|i| generate_frame(spec, &layout, i)).collect();
    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), serde_json::json!("dq-synth"));
    meta.insert("seed".into(), serde_json::json!(spec.seed));
    let mut out = SynthDataset {
        manifest: DatasetManifest {
            rig: spec.rig.clone(),
            frames: Vec::with_capacity(frames.len()),
            meta,
        },
        base: Vec::new(),
        lidar: Vec::new(),
        points: Vec::new(),
        truth: SynthTruth {
            spec: spec.clone(),
            frames: Vec::new(),
        },
    };
    for f in frames {
        out.manifest.frames.push(f.frame);
        out.base.push(f.base);
        out.lidar.push(f.lidar);
        out.points.push(f.points);
        out.truth.frames.push(f.truth);
    }
    Ok(out)
}

/// Grey panorama texture keyed by world azimuth, so overlapping cameras see
/// the same content at the same bearing.
fn background(az_deg: f64, row: u32, height: u32) -> f64 {
    let a = az_deg.to_radians();
    110.0 + 50.0 * (4.0 * a).sin() + 25.0 * (9.0 * a + 0.7).cos() + 40.0 * f64::from(row) / f64::from(height)
}

/// Image of `camera` for `frame`, drawn back to front.
pub fn render_camera(cam: &CameraSpec, frame: &Frame, truth: &FrameTruth) -> GrayImage {
    let mut img = GrayImage::from_fn(cam.width_px, cam.height_px, |x, y| {
        let az = cam.yaw_deg + column_to_angle(cam, f64::from(x) + 0.5);
        Luma([background(az, y, cam.height_px).round().clamp(0.0, 255.0) as u8])
    });
    let Some(view) = frame.view(&cam.name) else {
        return img;
    };
    let by_id: BTreeMap<&str, &InstanceTruth> = truth.instances.iter().map(|t| (t.instance_id.as_str(), t)).collect();
    let mut anns: Vec<(&Annotation2D, &InstanceTruth)> = view
        .annotations
        .iter()
        .filter_map(|a| by_id.get(a.instance_id.as_str()).map(|t| (a, *t)))
        .collect();
    anns.sort_by(|a, b| b.1.distance_m.total_cmp(&a.1.distance_m));
    for (a, t) in anns {
        let b = &a.bbox;
        let (x0, x1) = (b.x_min.round() as u32, (b.x_max.round() as u32).min(cam.width_px));
        let (y0, y1) = (b.y_min.round() as u32, (b.y_max.round() as u32).min(cam.height_px));
        for y in y0..y1 {
            for x in x0..x1 {
                img.put_pixel(x, y, Luma([t.shade]));
            }
        }
    }
    img
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SynthError {
    SynthError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl SynthDataset {
    /// Write the dataset, detection sets and ground truth under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        write_manifest(&self.manifest, dir)?;
        for (frame, points) in self.manifest.frames.iter().zip(&self.points) {
            if let Some(rel) = &frame.lidar_view.points_ref {
                let path = dir.join(rel);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
                }
                write_points(&path, points)?;
            }
        }
        if self.truth.spec.render_images {
            self.manifest
                .frames
                .par_iter()
                .zip(&self.truth.frames)
                .try_for_each(|(frame, truth)| -> Result<(), SynthError> {
                    for cam in &self.manifest.rig.cameras {
                        let Some(rel) = frame.view(&cam.name).and_then(|v| v.image_ref.as_ref()) else {
                            continue;
                        };
                        let path = dir.join(rel);
                        if let Some(parent) = path.parent() {
                            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
                        }
                        render_camera(cam, frame, truth).save(&path).map_err(|e| io_err(&path, e))?;
                    }
                    Ok(())
                })?;
        }
        write_detection_sets(&dir.join(BASE_DETECTIONS_FILE), &self.base)?;
        write_detection_sets(&dir.join(LIDAR_DETECTIONS_FILE), &self.lidar)?;
        let path = dir.join(TRUTH_FILE);
        let text = json::to_canonical_pretty(&self.truth).expect("truth serializes");
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

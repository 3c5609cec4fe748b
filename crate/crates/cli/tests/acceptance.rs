//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dq_core::dataset::{
    decode_points, encode_points, load_manifest, read_points, write_manifest, write_points, Annotation2D,
    Annotation3D, CameraView, DatasetManifest, Frame, LidarView, Point, SensorRig,
};
use dq_core::geometry::{iou3d, mc_iou3d, Box2D, Box3D, IouMode};
use dq_core::multimodal::{
    lost_ratio, prune_detections_by_distance, redundancy_ratio, sweep_distance, write_detection_sets, Detection,
    DetectionSet, DetectionSource,
};
use dq_core::multisource::{bcs, sweep_bcs, threshold_grid};
use dq_core::stats::{student_t_two_sided, welch_ttest};
use dq_core::synth::{generate_synthetic, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn dq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dq"))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// 1 -------------------------------------------------------------------------

fn overlap_reproduction() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rig_path = dir.path().join("rig.json");
    let rig = SensorRig::nuscenes_like(1600, 900);
    std::fs::write(&rig_path, serde_json::to_string(&rig).unwrap()).map_err(|e| e.to_string())?;

    let start = Instant::now();
    let out = dq().arg("pairs").arg("--rig").arg(&rig_path).output().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(out.status.success(), || format!("exit {:?}", out.status.code()))?;

    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut got: BTreeMap<String, f64> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let width: f64 = cols[3].parse().map_err(|_| format!("bad width in `{line}`"))?;
        got.insert(cols[0].to_string(), width);
    }
    let want: BTreeMap<String, f64> = [
        ("CAM_FRONT+CAM_FRONT_RIGHT", 15.0),
        ("CAM_FRONT+CAM_FRONT_LEFT", 15.0),
        ("CAM_BACK_RIGHT+CAM_FRONT_RIGHT", 15.0),
        ("CAM_BACK_LEFT+CAM_FRONT_LEFT", 15.0),
        ("CAM_BACK+CAM_BACK_RIGHT", 20.0),
        ("CAM_BACK+CAM_BACK_LEFT", 20.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    check(got.keys().eq(want.keys()), || format!("pairs {:?}", got.keys().collect::<Vec<_>>()))?;
    for (k, w) in &want {
        check((got[k] - w).abs() <= 1e-9, || format!("{k}: {} deg, want {w}", got[k]))?;
    }
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("6 pairs, widths 15/15/15/15/20/20 deg, {elapsed:.2?}"))
}

// 2 -------------------------------------------------------------------------

fn bcs_suite() -> Outcome {
    let start = Instant::now();
    let crop = Box2D::new(50.0, 0.0, 200.0, 200.0);
    let cases = [
        (Box2D::new(60.0, 10.0, 120.0, 90.0), 1.0),
        (Box2D::new(0.0, 0.0, 100.0, 100.0), 0.5),
        (Box2D::new(300.0, 0.0, 400.0, 100.0), 0.0),
    ];
    for (b, want) in cases {
        let got = bcs(&b, &crop).map_err(|e| e.to_string())?;
        check(got == want, || format!("bcs {b:?} = {got}, want {want}"))?;
    }

    let taus = threshold_grid(0.0, 1.0, 0.2);
    let results: Vec<Result<(), String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = SynthSpec {
                seed,
                frames: 200,
                objects: (1, rng.random_range(2..12)),
                shared_prob: rng.random_range(0.2..1.0),
                ..SynthSpec::default()
            };
            let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
            let variants = sweep_bcs(&data.manifest, &taus).map_err(|e| e.to_string())?;
            let kept: Vec<usize> = variants.iter().map(|v| v.stats.annotations_after).collect();
            check(kept.windows(2).all(|w| w[0] <= w[1]), || format!("seed {seed}: retention {kept:?}"))?;
            let last = variants.last().expect("six variants");
            check(
                last.tau == 1.0 && last.manifest.frames == data.manifest.frames && last.manifest.rig == data.manifest.rig,
                || format!("seed {seed}: tau=1 variant differs from the input"),
            )
        })
        .collect();
    results.into_iter().collect::<Result<Vec<()>, String>>()?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("3 examples exact, 100 seeds x 200 frames monotone, tau=1 identity, {elapsed:.2?}"))
}

// 3 -------------------------------------------------------------------------

fn random_pair(rng: &mut ChaCha8Rng) -> (Box3D, Box3D) {
    let size = |rng: &mut ChaCha8Rng| [rng.random_range(0.5..4.0), rng.random_range(0.5..6.0), rng.random_range(0.5..3.0)];
    let a = Box3D::new(
        [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-1.0..1.0)],
        size(rng),
        rng.random_range(-3.2..3.2),
    );
    let b = Box3D::new(
        [
            a.center[0] + rng.random_range(-2.5..2.5),
            a.center[1] + rng.random_range(-2.5..2.5),
            a.center[2] + rng.random_range(-1.0..1.0),
        ],
        size(rng),
        rng.random_range(-3.2..3.2),
    );
    (a, b)
}

fn iou_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs: Vec<(Box3D, Box3D)> = (0..1000).map(|_| random_pair(&mut rng)).collect();
    let errors: Vec<(usize, f64, f64)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| (i, iou3d(a, b), mc_iou3d(a, b, 1_000_000, i as u64)))
        .collect();
    let overlapping = errors.iter().filter(|e| e.1 > 0.0).count();
    let worst = errors.iter().max_by(|x, y| (x.1 - x.2).abs().total_cmp(&(y.1 - y.2).abs())).unwrap();
    let max_err = (worst.1 - worst.2).abs();
    check(max_err <= 1e-2, || format!("pair {}: exact {} vs sampled {}", worst.0, worst.1, worst.2))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(300))?;
    Ok(format!("1000 pairs ({overlapping} overlapping) at 1e6 samples, max |diff| {max_err:.2e}, {elapsed:.2?}"))
}

// 4 -------------------------------------------------------------------------

fn cube(x: f64) -> Detection {
    Detection::new(Box3D::new([x, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0))
}

fn rr_correctness() -> Outcome {
    let data = generate_synthetic(&SynthSpec {
        seed: 99,
        frames: 80,
        ..SynthSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let mut frames_checked = 0;
    for ((base, lidar), truth) in data.base.iter().zip(&data.lidar).zip(&data.truth.frames) {
        let r = redundancy_ratio(base, lidar, 0.5, IouMode::Rotated3d).map_err(|e| e.to_string())?;
        check(r.rr == truth.rr, || format!("{}: rr {:?}, truth {:?}", truth.frame_id, r.rr, truth.rr))?;
        frames_checked += usize::from(truth.rr.is_some());
    }
    check(frames_checked >= 50, || format!("only {frames_checked} frames with objects"))?;

    // B1 matched exactly, B2 shifted a quarter of its length (IoU 0.6), B3 alone
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = DetectionSet::new("f0", DetectionSource::Base, vec![cube(10.0), cube(20.0), cube(30.0)]);
    let lidar = DetectionSet::new("f0", DetectionSource::LidarOnly, vec![cube(10.0), cube(20.25)]);
    let (bp, lp, out) = (dir.path().join("base.json"), dir.path().join("lidar.json"), dir.path().join("rr.csv"));
    write_detection_sets(&bp, &[base]).map_err(|e| e.to_string())?;
    write_detection_sets(&lp, &[lidar]).map_err(|e| e.to_string())?;
    let status = dq()
        .args(["mm-redundancy", "--theta", "0.5"])
        .arg("--base")
        .arg(&bp)
        .arg("--lidar")
        .arg(&lp)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    let csv = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let row = csv.lines().nth(1).ok_or("no rows")?;
    let rr: f64 = row.rsplit(',').next().unwrap().parse().map_err(|_| format!("bad row `{row}`"))?;
    check(format!("{rr:.4}") == "0.6667", || format!("rr {rr}"))?;
    Ok(format!("{frames_checked} generated frames exact at theta 0.5, hand scene rr {rr:.4}"))
}

// 5 -------------------------------------------------------------------------

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> DetectionSet {
    let boxes = (0..n)
        .map(|_| {
            Detection::new(Box3D::new(
                [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-2.0..2.0)],
                [rng.random_range(0.5..3.0), rng.random_range(0.5..5.0), rng.random_range(0.5..2.5)],
                rng.random_range(-3.2..3.2),
            ))
        })
        .collect();
    DetectionSet::new("f", DetectionSource::Base, boxes)
}

fn distance_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let mut base = random_set(&mut rng, n);
        // duplicates must be counted as separate detections
        if n > 2 && rng.random_bool(0.3) {
            let dup = base.boxes[0].clone();
            base.boxes.push(dup);
        }
        // oracle: drop a known set of indices and count them
        let keep: Vec<bool> = base.boxes.iter().map(|_| rng.random_bool(0.6)).collect();
        let pruned = DetectionSet {
            boxes: base.boxes.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| d.clone()).collect(),
            ..base.clone()
        };
        let dropped = keep.iter().filter(|k| !**k).count();
        let l = lost_ratio(&base, &pruned).map_err(|e| e.to_string())?;
        check(l.removed == dropped && l.total == base.boxes.len(), || {
            format!("case {case}: removed {} of {}, oracle {dropped}", l.removed, l.total)
        })?;
        check(l.forms_agree(), || format!("case {case}: {l:?} forms disagree"))?;

        let by_distance = prune_detections_by_distance(&base, rng.random_range(0.0..80.0));
        let ld = lost_ratio(&base, &by_distance).map_err(|e| e.to_string())?;
        check(ld.forms_agree(), || format!("case {case}: distance pruning {ld:?} forms disagree"))?;

        let mut grid: Vec<f64> = (0..rng.random_range(1..10)).map(|_| rng.random_range(0.0..90.0)).collect();
        grid.sort_by(f64::total_cmp);
        grid.insert(0, 0.0);
        grid.push(f64::INFINITY);
        let n_lidar = rng.random_range(0..10);
        let lidar = random_set(&mut rng, n_lidar);
        let lidar = DetectionSet {
            source: DetectionSource::LidarOnly,
            ..lidar
        };
        let sweep = sweep_distance(&base, &lidar, &grid, 0.5, IouMode::Rotated3d).map_err(|e| e.to_string())?;
        let ls: Vec<f64> = sweep.iter().map(|o| o.lost_ratio.unwrap()).collect();
        check(ls[0] == 0.0, || format!("case {case}: l(0) = {}", ls[0]))?;
        check(*ls.last().unwrap() == 1.0, || format!("case {case}: l(inf) = {}", ls.last().unwrap()))?;
        check(ls.windows(2).all(|w| w[0] <= w[1]), || format!("case {case}: l not monotone {ls:?}"))?;
    }
    Ok("l(0)=0, l(inf)=1, monotone; both forms agree on 1000 random cases".into())
}

// 6 -------------------------------------------------------------------------

fn t_pdf(x: f64, dof: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_norm = ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_norm - (dof + 1.0) / 2.0 * (x * x / dof).ln_1p()).exp()
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Two-sided tail `P(|T| >= t)` by adaptive Simpson on the density.
fn quadrature_p(t: f64, dof: f64) -> f64 {
    let f = |x: f64| t_pdf(x, dof);
    let b = t.abs();
    if b == 0.0 {
        return 1.0;
    }
    let (fa, fm, fb) = (f(0.0), f(b / 2.0), f(b));
    let whole = b / 6.0 * (fa + 4.0 * fm + fb);
    1.0 - 2.0 * simpson(&f, 0.0, b, fa, fm, fb, whole, 1e-14, 50)
}

fn welch_oracle() -> Outcome {
    let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    check((r.t_stat + 1.0).abs() < 1e-12 && (r.dof - 8.0).abs() < 1e-12, || format!("t {} dof {}", r.t_stat, r.dof))?;
    check((r.p_value - 0.3466).abs() <= 1e-4, || format!("p {}", r.p_value))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut dofs: Vec<f64> = vec![1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 30.0, 60.0, 100.0, 150.0, 200.0];
    dofs.extend((0..40).map(|_| rng.random_range(1.0..200.0)));
    let mut ts: Vec<f64> = (-40..=40).map(|i| f64::from(i) * 0.25).collect();
    ts.extend((0..40).map(|_| rng.random_range(-10.0..10.0)));
    let cells: Vec<(f64, f64)> = dofs.iter().flat_map(|&d| ts.iter().map(move |&t| (d, t))).collect();
    let worst = cells
        .par_iter()
        .map(|&(d, t)| ((student_t_two_sided(t, d) - quadrature_p(t, d)).abs(), d, t))
        .reduce(|| (0.0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    check(worst.0 <= 1e-9, || format!("|diff| {:.3e} at dof {} t {}", worst.0, worst.1, worst.2))?;

    let mut invariance = 0.0f64;
    for _ in 0..500 {
        let na = rng.random_range(2..40);
        let nb = rng.random_range(2..40);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..50.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(5.0..60.0)).collect();
        let (shift, scale) = (rng.random_range(-100.0..100.0), rng.random_range(0.1..10.0));
        let map = |v: &[f64]| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let r0 = welch_ttest(&a, &b).map_err(|e| e.to_string())?;
        let r1 = welch_ttest(&map(&a), &map(&b)).map_err(|e| e.to_string())?;
        let dt = (r0.t_stat - r1.t_stat).abs() / r0.t_stat.abs().max(1.0);
        let dp = (r0.p_value - r1.p_value).abs();
        invariance = invariance.max(dt).max(dp);
    }
    check(invariance <= 1e-12, || format!("shift/scale changed results by {invariance:.3e}"))?;
    Ok(format!(
        "example t=-1 dof=8 p={:.4}; {} oracle cells max |diff| {:.1e}; invariance {:.1e}",
        r.p_value,
        cells.len(),
        worst.0,
        invariance
    ))
}

// 7 -------------------------------------------------------------------------

fn run_ok(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    check(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s);
    for (name, jobs) in [("a", "1"), ("b", "4")] {
        run_ok(
            dq().args(["--jobs", jobs, "synth", "--seed", "7", "--frames", "12", "--images", "--width", "160", "--height", "90"])
                .arg("--out")
                .arg(p(name)),
        )?;
    }
    check(tree_bytes(&p("a")) == tree_bytes(&p("b")), || "synth outputs differ".into())?;
    for (out, jobs) in [("r1.json", "1"), ("r2.json", "4")] {
        run_ok(
            dq().args(["--jobs", jobs, "report", "--seed", "7"])
                .arg("--dataset")
                .arg(p("a"))
                .arg("--out")
                .arg(p(out)),
        )?;
    }
    let r1 = std::fs::read(p("r1.json")).map_err(|e| e.to_string())?;
    let r2 = std::fs::read(p("r2.json")).map_err(|e| e.to_string())?;
    check(r1 == r2, || "report bytes differ".into())?;
    let v: serde_json::Value = serde_json::from_slice(&r1).map_err(|e| e.to_string())?;
    check(v["multimodal"].is_object() && v["similarity"]["pairs"].as_array().is_some_and(|a| a.len() == 6), || {
        "report is missing sections".into()
    })?;
    Ok(format!("synth and report byte-identical across runs and worker counts ({} bytes)", r1.len()))
}

// 8 -------------------------------------------------------------------------

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'z', '0', '9', '-', '_', ' ', '"', '\\', 'é', '漢', '\n', ','];
    (0..rng.random_range(1..10)).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn random_manifest(rng: &mut ChaCha8Rng, root: &Path) -> (DatasetManifest, Vec<Vec<Point>>) {
    let rig = SensorRig::nuscenes_like(rng.random_range(32..2000), rng.random_range(32..1200));
    let mut frames = Vec::new();
    let mut clouds = Vec::new();
    for i in 0..rng.random_range(0..6) {
        let frame_id = format!("{}-{i}", random_string(rng));
        let mut camera_views = BTreeMap::new();
        for cam in &rig.cameras {
            if !rng.random_bool(0.7) {
                continue;
            }
            let (w, h) = (f64::from(cam.width_px), f64::from(cam.height_px));
            let annotations = (0..rng.random_range(0..4))
                .map(|_| {
                    let x0 = rng.random_range(0.0..w - 1.0);
                    let y0 = rng.random_range(0.0..h - 1.0);
                    Annotation2D {
                        instance_id: random_string(rng),
                        category: random_string(rng),
                        bbox: Box2D::new(x0, y0, rng.random_range(x0 + 1e-6..=w), rng.random_range(y0 + 1e-6..=h)),
                    }
                })
                .collect();
            camera_views.insert(cam.name.clone(), CameraView {
                image_ref: None,
                annotations,
            });
        }
        let points: Vec<Point> = (0..rng.random_range(0..64))
            .map(|_| {
                let bits: [u32; 4] = rng.random();
                Point::new(f32::from_bits(bits[0]), f32::from_bits(bits[1]), f32::from_bits(bits[2]), f32::from_bits(bits[3]))
            })
            .collect();
        let rel = format!("points/{i}.bin");
        write_points(&root.join(&rel), &points).unwrap();
        clouds.push(points);
        let annotations = (0..rng.random_range(0..5))
            .map(|_| Annotation3D {
                instance_id: random_string(rng),
                category: "car".into(),
                bbox: Box3D::new(
                    [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-5.0..5.0)],
                    [rng.random_range(1e-3..20.0), rng.random_range(1e-3..20.0), rng.random_range(1e-3..20.0)],
                    rng.random_range(-3.2..3.2),
                ),
            })
            .collect();
        frames.push(Frame {
            frame_id,
            timestamp_us: rng.random(),
            camera_views,
            lidar_view: LidarView {
                points_ref: Some(rel),
                annotations,
            },
        });
    }
    let mut meta = BTreeMap::new();
    meta.insert("note".into(), serde_json::json!(random_string(rng)));
    meta.insert("value".into(), serde_json::json!(rng.random::<f64>() * 1e6));
    (DatasetManifest { rig, frames, meta }, clouds)
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut points_checked = 0;
    for case in 0..100 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (m, clouds) = random_manifest(&mut rng, dir.path());
        write_manifest(&m, dir.path()).map_err(|e| e.to_string())?;
        let back = load_manifest(dir.path()).map_err(|e| format!("case {case}: {e}"))?;
        check(back == m, || format!("case {case}: manifest changed on round trip"))?;
        for (f, pts) in back.frames.iter().zip(&clouds) {
            let got = read_points(&dir.path().join(f.lidar_view.points_ref.as_ref().unwrap())).map_err(|e| e.to_string())?;
            let bits = |v: &[Point]| v.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits(), p.intensity.to_bits()]).collect::<Vec<_>>();
            check(bits(&got) == bits(pts), || format!("case {case}: point bits changed"))?;
            points_checked += pts.len();
        }
    }
    let raw: Vec<u8> = (0..16 * 4096).map(|_| rng.random()).collect();
    let decoded = decode_points(&raw).map_err(|e| e.to_string())?;
    check(encode_points(&decoded) == raw, || "raw bytes changed through decode/encode".into())?;
    Ok(format!("100 manifests identical; {points_checked} file points and 4096 raw records bit-exact"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("overlap reproduction", overlap_reproduction),
        ("bcs suite", bcs_suite),
        ("iou oracle equivalence", iou_oracle),
        ("rr correctness", rr_correctness),
        ("distance-pruning laws", distance_laws),
        ("welch t-test oracle", welch_oracle),
        ("determinism", determinism),
        ("round-trip", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} [{name}]: PASS - {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL - {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! `dq`: redundancy measurement and pruning for driving datasets.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dq", version, about = "Measure and prune redundancy in multi-camera / LiDAR datasets")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List overlapping camera pairs and their crop columns.
    Pairs {
        /// Rig file, or a dataset manifest carrying a rig.
        #[arg(long, conflicts_with = "dataset")]
        rig: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overlap-crop similarity per frame and pair.
    Similarity {
        #[arg(long)]
        dataset: PathBuf,
        /// Restrict to one pair, e.g. `CAM_FRONT+CAM_FRONT_LEFT`.
        #[arg(long)]
        pair: Option<String>,
        #[command(flatten)]
        taus: TauArgs,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Completeness-guided pruning of duplicate camera annotations.
    PruneBcs {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        taus: TauArgs,
        /// Output directory for variants and CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Camera/LiDAR redundancy ratio per frame.
    MmRedundancy {
        #[command(flatten)]
        det: DetectionArgs,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Near-range LiDAR pruning and lost-ratio sweep.
    PruneDistance {
        #[command(flatten)]
        det: DetectionArgs,
        /// Single distance threshold in metres; writes a pruned dataset.
        #[arg(long = "t-dist", conflicts_with = "sweep")]
        t_dist: Option<f64>,
        /// Threshold grid `lo:hi:step` in metres.
        #[arg(long)]
        sweep: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Welch t-test of object distance between high- and low-redundancy samples.
    Ttest {
        #[command(flatten)]
        det: DetectionArgs,
        /// `per-box`, `frame-threshold:<rr>` or `frame-quantile:<q>`.
        #[arg(long, default_value = "per-box")]
        split: String,
        /// JSON output path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full redundancy report as one JSON document.
    Report {
        #[command(flatten)]
        det: DetectionArgs,
        #[command(flatten)]
        taus: TauArgs,
        /// Distance grid `lo:hi:step` in metres.
        #[arg(long = "t-sweep", default_value = "0:30:5")]
        t_sweep: String,
        #[arg(long, default_value = "per-box")]
        split: String,
        /// Recorded in the report.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct TauArgs {
    /// Single spread threshold.
    #[arg(long, conflicts_with = "sweep")]
    tau: Option<f64>,
    /// Threshold grid `lo:hi:step`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
pub struct DetectionArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Baseline (fusion) detections; defaults to `<dataset>/detections/base.jsonl`.
    #[arg(long)]
    base: Option<PathBuf>,
    /// LiDAR-only detections; defaults to `<dataset>/detections/lidar.jsonl`.
    #[arg(long)]
    lidar: Option<PathBuf>,
    /// IoU threshold for a match.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Use bird's-eye-view IoU instead of full 3D IoU.
    #[arg(long)]
    bev: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    /// Objects per frame `lo:hi`.
    #[arg(long, default_value = "2:8")]
    objects: String,
    /// Object distance range `min:max` in metres.
    #[arg(long, default_value = "3:50")]
    distance: String,
    #[arg(long = "shared-prob", default_value_t = 0.3)]
    shared_prob: f64,
    /// Render PNG images for every camera.
    #[arg(long)]
    images: bool,
    #[arg(long, default_value_t = 320)]
    width: u32,
    #[arg(long, default_value_t = 180)]
    height: u32,
    /// Rig file to use instead of the built-in six-camera rig.
    #[arg(long)]
    rig: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DQ_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

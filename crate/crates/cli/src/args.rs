use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "latentlab",
    version,
    about = "Latent-label data engine for LiDAR panoptic segmentation"
)]
pub struct Cli {
    /// `key = value` config file; explicit flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-interval labeled/unlabeled frame split.
    Split(SplitArgs),
    /// Self-training manifest from a split plus ground-truth and pseudo label dirs.
    Manifest(ManifestArgs),
    /// Cylinder-Mix two labeled scans.
    Mix(MixArgs),
    /// Cylindrical voxel index of every point.
    Voxelize(VoxelizeArgs),
    /// Per-voxel max pooling of point features.
    Bevpool(BevpoolArgs),
    /// Project a scan into a camera image.
    Project(ProjectArgs),
    /// Instance boxes from a pixel mapping and point labels.
    Boxes(BoxesArgs),
    /// Instance heatmap from boxes or masks.
    Heatmap(HeatmapArgs),
    /// Center/offset panoptic decoding.
    Decode(DecodeArgs),
    /// PQ, mIoU and boundary accuracy.
    Eval(EvalArgs),
    /// Composite segmentation loss.
    Loss(LossArgs),
    /// split -> mix -> voxelize -> project -> boxes -> heatmap over a dataset directory.
    Pipeline(PipelineArgs),
    /// Write a small synthetic SemanticKITTI-style dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Bins along (rho, phi, z).
    #[arg(long)]
    pub grid: Option<String>,
    /// rho_min,rho_max,z_min,z_max in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Number of frames (ids are 0..N).
    #[arg(
        long,
        conflicts_with = "frames_dir",
        required_unless_present = "frames_dir"
    )]
    pub frames: Option<usize>,
    /// Directory of `<frame>.bin` scans; frame ids are the sorted file stems.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Also write the split as `frame<TAB>labeled|unlabeled`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub pseudo_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub scan_a: PathBuf,
    #[arg(long)]
    pub labels_a: PathBuf,
    #[arg(long)]
    pub scan_b: PathBuf,
    #[arg(long)]
    pub labels_b: PathBuf,
    /// Frame id written to the provenance sidecar for scan A
    /// (default: numeric file stem, else 0).
    #[arg(long)]
    pub frame_a: Option<u32>,
    /// Default: numeric file stem, else 1.
    #[arg(long)]
    pub frame_b: Option<u32>,
    #[arg(long)]
    pub regions: Option<String>,
    /// Probability of applying the mix.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    #[arg(long)]
    pub scan: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Emit -1 rows for points outside the bounds instead of clamping.
    #[arg(long)]
    pub drop_out_of_bounds: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BevpoolArgs {
    /// N x C LLT1 features.
    #[arg(long)]
    pub features: PathBuf,
    /// N x 3 LLT1 voxel indices; rows with negative entries are skipped.
    #[arg(long)]
    pub indices: PathBuf,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub fill: f32,
    /// Write G_x x G_y x (G_z*C) instead of G_x x G_y x G_z x C.
    #[arg(long)]
    pub fold_height: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Camera index selecting the `P<view>` row.
    #[arg(long)]
    pub view: Option<u8>,
    /// H,W in pixels.
    #[arg(long)]
    pub image_size: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoxesArgs {
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub things: Option<String>,
    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, required_unless_present = "masks", conflicts_with = "masks")]
    pub boxes: Option<PathBuf>,
    /// K x H x W LLT1 masks.
    #[arg(long, requires = "scores")]
    pub masks: Option<PathBuf>,
    /// Comma-separated mask scores.
    #[arg(long)]
    pub scores: Option<String>,
    /// H,W; required with --boxes.
    #[arg(long)]
    pub size: Option<String>,
    /// Only use boxes from this view.
    #[arg(long)]
    pub view: Option<u8>,
    #[arg(long)]
    pub r_corner: Option<f64>,
    #[arg(long)]
    pub p_center: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an 8-bit grayscale PNG.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// H x W LLT1 semantic class map.
    #[arg(long)]
    pub sem: PathBuf,
    #[arg(long)]
    pub centers_hm: PathBuf,
    /// H x W x 2 LLT1 (row, column) offsets.
    #[arg(long)]
    pub offsets: PathBuf,
    #[arg(long)]
    pub fore_mask: PathBuf,
    #[arg(long)]
    pub things: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Relabel each instance with its majority class.
    #[arg(long)]
    pub majority: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `.label` file or `2 x H x W` LLT1 panoptic map.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub things: Option<String>,
    #[arg(long, default_value = "")]
    pub stuff: String,
    #[arg(long, default_value = "0")]
    pub ignore: String,
    /// Defaults to the largest class id seen plus one.
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Scan providing point positions for boundary-distance accuracy.
    #[arg(long)]
    pub scan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub report: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Directory holding sem_logits, sem_gt, hm_pred, hm_gt, os_pred, os_gt,
    /// fm_pred and fm_gt as `.llt1` files.
    #[arg(long)]
    pub inputs: PathBuf,
    /// mu_hm,mu_os,mu_fm
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, default_value = "")]
    pub ignore: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Dataset root with `velodyne/`, `labels/` and `calib.txt` or `calib/<frame>.txt`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub image_size: Option<String>,
    #[arg(long)]
    pub view: Option<u8>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Worker threads (default: LATENTLAB_JOBS or the number of CPUs).
    #[arg(long, env = "LATENTLAB_JOBS")]
    pub jobs: Option<usize>,
    /// Skip work whose output files already exist.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    #[arg(long, default_value_t = 4000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

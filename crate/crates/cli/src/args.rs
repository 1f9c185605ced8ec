use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "freebies",
    version,
    about = "Training-time detection tricks: mixup, augmentation, schedules, evaluation",
    args_override_self = true,
    propagate_version = true
)]
pub struct Cli {
    /// TOML file with default flag values (also read from FREEBIES_CONFIG).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads; 0 picks one per core. Never changes output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blend pairs of samples from two datasets at natural scale.
    Mixup(MixupArgs),
    /// Run the single- or multi-stage augmentation policy over a dataset.
    Augment(AugmentArgs),
    /// Print a learning-rate table.
    Schedule(ScheduleArgs),
    /// Plan random square input sizes per batch.
    Shapes(ShapesArgs),
    /// Print smoothed classification targets.
    Targets(TargetsArgs),
    /// Compare per-device and synchronized batch-norm statistics.
    SyncbnCheck(SyncbnArgs),
    /// Detection evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Sliding out-of-context patch robustness harness.
    #[command(subcommand)]
    Elephant(ElephantCommand),
    /// Print toolkit version and PRNG family.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    /// Partner drawn from a seeded permutation of the second dataset.
    Shuffle,
    /// Partner i of the second dataset (cycling when shorter).
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Voc,
    Coco,
}

#[derive(Debug, Args, Serialize)]
pub struct MixupArgs {
    /// First dataset (VOC directory, COCO directory or COCO JSON); weight lambda.
    #[arg(long)]
    pub a: PathBuf,
    /// Second dataset; weight 1 - lambda.
    #[arg(long)]
    pub b: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Beta distribution alpha.
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// Beta distribution beta.
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,
    /// Use this ratio for every pair instead of sampling.
    #[arg(long)]
    pub fixed_ratio: Option<f64>,
    /// Drop labels whose mixed weight is at or below this value (0 keeps all).
    #[arg(long, default_value_t = 0.0)]
    pub min_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PairStrategy::Shuffle)]
    pub pair_strategy: PairStrategy,
    /// Number of mixed samples; defaults to the size of the first dataset.
    #[arg(long)]
    pub count: Option<usize>,
    /// Output layout; defaults to the layout of the first dataset.
    #[arg(long, value_enum)]
    pub out_format: Option<DatasetFormat>,
    /// Write JPEG images instead of PNG.
    #[arg(long)]
    pub lossy: bool,
    /// Fail on unknown classes instead of skipping them.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Jitter, expansion, constrained crop, random-kernel resize, flip.
    Single,
    /// Short-side resize and flip only.
    Multi,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyKind::Single)]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write before/after images for the first K samples under preview/.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub preview: usize,
    /// Square output size of the single-stage policy.
    #[arg(long, default_value_t = 416)]
    pub input_size: usize,
    /// Expansion fill as r,g,b in [0,1]; defaults to the dataset mean.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub fill: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub out_format: Option<DatasetFormat>,
    #[arg(long)]
    pub lossy: bool,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Step,
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct ScheduleArgs {
    #[arg(long, value_enum)]
    pub mode: ScheduleMode,
    #[arg(long)]
    pub base_lr: f64,
    /// Total iterations (epochs with --iters-per-epoch).
    #[arg(long)]
    pub total: u64,
    /// Warmup iterations (epochs with --iters-per-epoch).
    #[arg(long, default_value_t = freebies::schedule::DEFAULT_WARMUP_ITERS)]
    pub warmup: u64,
    /// Step-mode milestones, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub milestones: Vec<u64>,
    /// Step-mode decay factor.
    #[arg(long, default_value_t = 0.1)]
    pub factor: f64,
    /// Row spacing (epochs with --iters-per-epoch).
    #[arg(long, default_value_t = 1)]
    pub every: u64,
    /// Read --total, --warmup, --milestones and --every as epochs.
    #[arg(long)]
    pub iters_per_epoch: Option<u64>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct ShapesArgs {
    #[arg(long, default_value_t = 32)]
    pub stride: u32,
    #[arg(long, default_value_t = 320)]
    pub min_size: u32,
    #[arg(long, default_value_t = 608)]
    pub max_size: u32,
    #[arg(long)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeModeArg {
    Epsilon,
    EpsilonOverKMinus1,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["label", "sigmoid"]))]
pub struct TargetsArgs {
    /// Number of classes (softmax targets).
    #[arg(long, requires = "label")]
    pub classes: Option<usize>,
    /// True class index for a smoothed one-hot vector.
    #[arg(long, requires = "classes")]
    pub label: Option<usize>,
    /// Hard sigmoid targets to smooth, comma separated 0/1 values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["classes", "label"])]
    pub sigmoid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Negative-side rule for sigmoid targets.
    #[arg(long, value_enum, default_value_t = NegativeModeArg::Epsilon)]
    pub negative_mode: NegativeModeArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SyncbnArgs {
    /// CSV with device_id,value rows; a header line is optional.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Mean average precision of detections against ground truth.
    Map(EvalMapArgs),
    /// Per-class AP differences between two per_class.csv reports.
    Delta(EvalDeltaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApModeArg {
    /// 11-point interpolated AP.
    Voc07,
    /// Area under the interpolated PR curve.
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalMapArgs {
    /// Ground truth: VOC directory, COCO directory or COCO JSON.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections as JSON lines.
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    #[arg(long, value_enum, default_value_t = ApModeArg::Voc07)]
    pub ap_mode: ApModeArg,
    /// Also report mAP averaged over IoU 0.50:0.05:0.95.
    #[arg(long)]
    pub coco_range: bool,
    /// Directory for summary.json and per_class.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalDeltaArgs {
    /// Baseline per_class.csv.
    #[arg(long)]
    pub a: PathBuf,
    /// Compared per_class.csv.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
}

#[derive(Debug, Subcommand)]
pub enum ElephantCommand {
    /// Paste a patch over a scene on a sliding grid and write the frames.
    Gen(ElephantGenArgs),
    /// Score detections on generated frames.
    Eval(ElephantEvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ElephantGenArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub patch: PathBuf,
    /// Horizontal stride; defaults to half the scaled patch width.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Vertical stride; defaults to --stride, else half the patch height.
    #[arg(long)]
    pub stride_y: Option<usize>,
    /// Grayscale image used as patch opacity (first channel).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Class id recorded for the patch.
    #[arg(long, default_value_t = 0)]
    pub class_id: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanSourceArg {
    Annotations,
    Detections,
}

#[derive(Debug, Args, Serialize)]
pub struct ElephantEvalArgs {
    /// frames.json written by `elephant gen`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Detections on the frames as JSON lines (image_id = frame id).
    #[arg(long)]
    pub dets: PathBuf,
    /// Clean-scene objects as JSON lines with class_id and bbox.
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long, value_enum, default_value_t = CleanSourceArg::Annotations)]
    pub clean_source: CleanSourceArg,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Skip objects whose IoU with the patch reaches this value.
    #[arg(long)]
    pub exclude_occluded: Option<f64>,
}

//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splatstereo::colmap::ImageId;
use splatstereo::eval::{DatasetFamily, Weighting};

use crate::commands::{self, EvalArgs};
use crate::config::{ConfigFile, PipelineConfig};
use crate::{CliError, EXIT_DATA, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "splatstereo", version, about = "Stereo training data from COLMAP scenes, meshes and Gaussian splats")]
pub struct Cli {
    /// Worker threads; defaults to the available hardware parallelism.
    /// Outputs do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Raise log verbosity (-v info, -vv debug). `RUST_LOG` also applies.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the COLMAP model and report off-centre principal points.
    Validate(ValidateCmd),
    /// Per-vertex observability heatmap, camera ranking and top-k selection.
    Observability(ObservabilityCmd),
    /// Render one view's image, depth and validity mask.
    Render(RenderCmd),
    /// Write a rectified stereo dataset and its manifest.
    Synth(SynthCmd),
    /// Bad-τ evaluation of predicted disparities against ground truth.
    Eval(EvalCmd),
    /// Pooled disparity histogram, optionally with baseline suggestions.
    Histogram(HistogramCmd),
}

/// Settings shared by every scene-based command.
#[derive(Debug, Default, Args)]
pub struct SceneFlags {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Scene root directory.
    #[arg(long, value_name = "DIR")]
    pub scene_dir: Option<PathBuf>,
    /// Name used in output file names; defaults to the scene directory name.
    #[arg(long)]
    pub scene_name: Option<String>,
    /// COLMAP model directory relative to the scene root [default: sparse/0].
    #[arg(long, value_name = "DIR")]
    pub colmap_subdir: Option<PathBuf>,
    /// Override every camera's resolution, e.g. 320x240.
    #[arg(long, value_name = "WxH")]
    pub resolution: Option<String>,
    /// Output directory [default: output].
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

/// Mesh preprocessing.
#[derive(Debug, Default, Args)]
pub struct MeshFlags {
    /// Triangle mesh (.ply or .obj).
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,
    /// Keep only the largest connected component of the mesh.
    #[arg(long)]
    pub largest_cluster: bool,
}

/// Observability filtering.
#[derive(Debug, Default, Args)]
pub struct ObservabilityFlags {
    /// Reject views meeting the surface at more than this many degrees
    /// from the normal [default: 80].
    #[arg(long, value_name = "DEG")]
    pub grazing_limit: Option<f64>,
    /// Disable the grazing-angle test.
    #[arg(long, conflicts_with = "grazing_limit")]
    pub no_grazing_filter: bool,
    /// Number of cameras to select [default: 5].
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateCmd {
    #[command(flatten)]
    pub scene: SceneFlags,
    /// Allowed principal point offset as a fraction of the image size
    /// [default: 0.02].
    #[arg(long, value_name = "FRACTION")]
    pub tolerance: Option<f64>,
    /// Exit with status 1 when any camera is reported.
    #[arg(long)]
    pub strict: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObservabilityCmd {
    #[command(flatten)]
    pub scene: SceneFlags,
    #[command(flatten)]
    pub mesh: MeshFlags,
    #[command(flatten)]
    pub observability: ObservabilityFlags,
}

/// Render source and splat settings.
#[derive(Debug, Default, Args)]
pub struct SourceFlags {
    #[command(flatten)]
    pub mesh: MeshFlags,
    /// Gaussian-splat scene (.ply in the reference layout).
    #[arg(long, value_name = "FILE", conflicts_with = "mesh")]
    pub splats: Option<PathBuf>,
    /// Splat depth is valid where accumulated alpha exceeds this [default: 0.5].
    #[arg(long, value_name = "ALPHA")]
    pub alpha_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderCmd {
    #[command(flatten)]
    pub scene: SceneFlags,
    #[command(flatten)]
    pub source: SourceFlags,
    /// COLMAP image id of the view to render.
    #[arg(long)]
    pub image_id: ImageId,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub scene: SceneFlags,
    #[command(flatten)]
    pub source: SourceFlags,
    #[command(flatten)]
    pub observability: ObservabilityFlags,
    /// Stereo baselines in world units, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "B")]
    pub baselines: Vec<f64>,
    /// Image ids to render, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "ID")]
    pub cameras: Vec<ImageId>,
    /// Selection file with one image id per line.
    #[arg(long, value_name = "FILE", conflicts_with = "cameras")]
    pub selection: Option<PathBuf>,
    /// Left-right consistency tolerance in pixels [default: 1].
    #[arg(long, value_name = "PX")]
    pub occlusion_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Eth3d,
    Middlebury,
    Kitti,
}

impl From<FamilyArg> for DatasetFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Eth3d => DatasetFamily::Eth3d,
            FamilyArg::Middlebury => DatasetFamily::Middlebury,
            FamilyArg::Kitti => DatasetFamily::Kitti,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum WeightingArg {
    /// Mean of per-pair percentages.
    #[default]
    Pair,
    /// Total bad pixels over total evaluated pixels.
    Pixel,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Directory of predicted disparities named `<pair id>.pfm` or `.png`.
    #[arg(long, value_name = "DIR")]
    pub pred_dir: PathBuf,
    /// Ground truth: a manifest, a dataset directory, or a directory with
    /// `disp/` and optional `noc/`.
    #[arg(long, value_name = "PATH")]
    pub gt: PathBuf,
    /// Benchmark family; selects τ (ETH3D 1, Middlebury 2, KITTI 3).
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Error threshold in pixels; overrides the family default.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Row label in the report.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, value_enum, default_value_t = WeightingArg::Pair)]
    pub weighting: WeightingArg,
    /// Write the JSON report here.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    /// Exit with status 1 when the All error exceeds --max-bad.
    #[arg(long, requires = "max_bad")]
    pub strict: bool,
    /// Largest acceptable All percentage under --strict.
    #[arg(long, value_name = "PCT")]
    pub max_bad: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HistogramCmd {
    /// Disparity files (.pfm, 16-bit .png), manifests or dataset directories.
    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,
    /// Bin width in pixels.
    #[arg(long, default_value_t = 1.0, value_name = "PX")]
    pub bin_width: f64,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Suggest per-pair baselines reaching this median disparity.
    #[arg(long, value_name = "PX")]
    pub target_disparity: Option<f64>,
}

fn scene_config(scene: &SceneFlags, extra: ConfigFile) -> Result<PipelineConfig, CliError> {
    let flags = ConfigFile {
        scene_dir: scene.scene_dir.clone(),
        scene_name: scene.scene_name.clone(),
        colmap_subdir: scene.colmap_subdir.clone(),
        resolution: scene.resolution.clone(),
        output_dir: scene.output_dir.clone(),
        ..extra
    };
    let file = match &scene.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    PipelineConfig::resolve(flags.or(file))
}

fn mesh_overrides(m: &MeshFlags, into: &mut ConfigFile) {
    into.mesh_path = m.mesh.clone();
    into.largest_cluster = m.largest_cluster.then_some(true);
}

fn observability_overrides(o: &ObservabilityFlags, into: &mut ConfigFile) {
    into.grazing_limit_deg = o.grazing_limit;
    into.grazing_filter = o.no_grazing_filter.then_some(false);
    into.top_k_cameras = o.top_k;
}

fn source_overrides(s: &SourceFlags, into: &mut ConfigFile) {
    mesh_overrides(&s.mesh, into);
    into.splat_path = s.splats.clone();
    into.alpha_threshold = s.alpha_threshold;
    // A source flag replaces, rather than adds to, the file's source.
    if into.mesh_path.is_some() || into.splat_path.is_some() {
        into.mesh_path.get_or_insert_with(PathBuf::new);
        into.splat_path.get_or_insert_with(PathBuf::new);
    }
}

/// Empty paths stand for "explicitly unset" after merging.
fn clear_placeholders(mut cfg: PipelineConfig) -> PipelineConfig {
    cfg.mesh_path = cfg.mesh_path.filter(|p| !p.as_os_str().is_empty());
    cfg.splat_path = cfg.splat_path.filter(|p| !p.as_os_str().is_empty());
    cfg
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate(c) => {
            let extra = ConfigFile {
                principal_point_tolerance: c.tolerance,
                ..Default::default()
            };
            let cfg = scene_config(&c.scene, extra)?;
            commands::cmd_validate(&cfg, c.strict, c.report.as_deref()).map(|_| ())
        }
        Command::Observability(c) => {
            let mut extra = ConfigFile::default();
            mesh_overrides(&c.mesh, &mut extra);
            observability_overrides(&c.observability, &mut extra);
            let cfg = scene_config(&c.scene, extra)?;
            let out = commands::cmd_observability(&cfg)?;
            for s in &out.ranking {
                println!("{}\t{}", s.image_id, s.score);
            }
            Ok(())
        }
        Command::Render(c) => {
            let mut extra = ConfigFile::default();
            source_overrides(&c.source, &mut extra);
            let cfg = clear_placeholders(scene_config(&c.scene, extra)?);
            let out = commands::cmd_render(&cfg, c.image_id)?;
            println!("{}", out.image.display());
            Ok(())
        }
        Command::Synth(c) => {
            let mut extra = ConfigFile::default();
            source_overrides(&c.source, &mut extra);
            observability_overrides(&c.observability, &mut extra);
            extra.baselines = (!c.baselines.is_empty()).then_some(c.baselines);
            extra.cameras = (!c.cameras.is_empty()).then_some(c.cameras);
            extra.occlusion_tolerance_px = c.occlusion_tolerance;
            let cfg = clear_placeholders(scene_config(&c.scene, extra)?);
            let m = commands::cmd_synth(&cfg, c.selection.as_deref())?;
            println!("{} pairs written to {}", m.entries.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::Eval(c) => {
            let args = EvalArgs {
                pred_dir: c.pred_dir,
                gt: c.gt,
                family: c.family.map(Into::into),
                tau: c.tau,
                name: c.name,
                weighting: match c.weighting {
                    WeightingArg::Pair => Weighting::Pair,
                    WeightingArg::Pixel => Weighting::Pixel,
                },
                json: c.json,
                strict: c.strict,
                max_bad_pct: c.max_bad,
            };
            commands::cmd_eval(&args).map(|_| ())
        }
        Command::Histogram(c) => {
            commands::cmd_histogram(&c.inputs, c.bin_width, c.output.as_deref(), c.target_disparity).map(|_| ())
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

//! Subcommand implementations. Every command writes its outputs with
//! atomic renames and produces byte-identical files for identical inputs.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use splatstereo::colmap::{load_scene_model, validate_principal_point, ImageId, PrincipalPointWarning, SceneModel};
use splatstereo::dataset::{synth_dataset, DatasetManifest, RenderSource, SynthOptions, MANIFEST_FILE};
use splatstereo::eval::{
    evaluate_pair, render_report, report_json, DatasetFamily, EvalConfig, EvalReport, NamedPair, Weighting,
};
use splatstereo::formats::png::{decode_disparity_png16, decode_mask, encode_gray8, encode_mask, encode_rgb8};
use splatstereo::formats::{pfm, ply::PlyEncoding, write_atomic};
use splatstereo::mesh::{build_bvh, keep_largest_cluster, load_mesh, write_mesh_ply, AcceleratedMesh};
use splatstereo::observability::{
    export_heatmap, score_cameras, select_top_k, vertex_observability_with, CameraScore, ObservabilityOptions,
};
use splatstereo::raster::{DisparityMap, Mask};
use splatstereo::raycast::{raycast_hits, shade_hits};
use splatstereo::splat::{load_splats, render_splats_with, RenderOptions, SplatScene};
use splatstereo::stereo::{disparity_histogram, disparity_to_depth, median_depth, suggest_baseline};

use crate::config::{PipelineConfig, SourcePath};
use crate::CliError;

pub const HEATMAP_FILE: &str = "observability_heatmap.ply";
pub const SCORES_FILE: &str = "camera_scores.csv";
pub const SELECTION_FILE: &str = "selected_cameras.txt";

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::io(path, e))
}

fn load_model(cfg: &PipelineConfig) -> Result<SceneModel, CliError> {
    let dir = cfg.colmap_dir();
    let model = load_scene_model(&dir).with_context(|| format!("COLMAP model in {}", dir.display()))?;
    info!("loaded {} cameras and {} images from {}", model.cameras.len(), model.images.len(), dir.display());
    Ok(model)
}

fn load_accel(cfg: &PipelineConfig, path: &Path) -> Result<AcceleratedMesh, CliError> {
    let mut mesh = load_mesh(path).with_context(|| format!("mesh {}", path.display()))?;
    if cfg.largest_cluster {
        let before = mesh.face_count();
        mesh = keep_largest_cluster(&mesh).with_context(|| format!("mesh {}", path.display()))?;
        info!("largest cluster keeps {} of {before} faces", mesh.face_count());
    }
    let accel = build_bvh(mesh).with_context(|| format!("mesh {}", path.display()))?;
    info!("BVH with {} nodes over {} faces", accel.node_count(), accel.mesh().face_count());
    Ok(accel)
}

fn load_splat_scene(path: &Path) -> Result<SplatScene, CliError> {
    let scene = load_splats(path).with_context(|| format!("splats {}", path.display()))?;
    info!("loaded {} splats", scene.len());
    Ok(scene)
}

fn render_options(cfg: &PipelineConfig) -> RenderOptions {
    RenderOptions {
        validity_threshold: cfg.alpha_threshold,
        ..RenderOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub colmap_dir: PathBuf,
    pub cameras: usize,
    pub images: usize,
    pub tolerance_fraction: f64,
    pub warnings: Vec<PrincipalPointWarning>,
}

/// Loads the COLMAP model and checks principal points. Under `strict`,
/// any warning fails the command after the report is written.
pub fn cmd_validate(cfg: &PipelineConfig, strict: bool, report_path: Option<&Path>) -> Result<ValidateReport, CliError> {
    let model = load_model(cfg)?;
    let warnings = validate_principal_point(&model, cfg.principal_point_tolerance);
    for w in &warnings {
        warn!("{w}");
    }
    let report = ValidateReport {
        colmap_dir: cfg.colmap_dir(),
        cameras: model.cameras.len(),
        images: model.images.len(),
        tolerance_fraction: cfg.principal_point_tolerance,
        warnings,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    match report_path {
        Some(p) => write(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    if strict && !report.warnings.is_empty() {
        return Err(CliError::Failed(format!(
            "{} camera(s) have an off-centre principal point",
            report.warnings.len()
        )));
    }
    Ok(report)
}

fn observability_options(cfg: &PipelineConfig) -> ObservabilityOptions {
    ObservabilityOptions {
        grazing_limit_deg: cfg.grazing_limit_deg,
        epsilon: None,
    }
}

fn rank_cameras(cfg: &PipelineConfig, accel: &AcceleratedMesh, model: &SceneModel) -> Result<(Vec<CameraScore>, splatstereo::observability::ObservabilityField), CliError> {
    let field = vertex_observability_with(accel, model, &observability_options(cfg)).context("vertex observability")?;
    let scores = score_cameras(accel, &field, model, cfg.resolution).context("camera scoring")?;
    Ok((scores, field))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityOutputs {
    pub heatmap: PathBuf,
    pub scores: PathBuf,
    pub selection: PathBuf,
    pub ranking: Vec<CameraScore>,
    pub selected: Vec<ImageId>,
}

/// Writes the vertex heatmap, the full camera ranking and the top-k
/// selection.
pub fn cmd_observability(cfg: &PipelineConfig) -> Result<ObservabilityOutputs, CliError> {
    let model = load_model(cfg)?;
    let accel = load_accel(cfg, cfg.require_mesh()?)?;
    let (ranking, field) = rank_cameras(cfg, &accel, &model)?;
    let selected = select_top_k(&ranking, cfg.top_k_cameras);

    let heatmap = export_heatmap(accel.mesh(), &field).context("heatmap")?;
    let mut ply = Vec::new();
    write_mesh_ply(&heatmap, &mut ply, PlyEncoding::BinaryLittleEndian).context("heatmap")?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(anyhow!("csv: {e}"));
    csv.write_record(["image_id", "name", "score"]).map_err(csv_err)?;
    for s in &ranking {
        let name = &model.images[&s.image_id].name;
        csv.write_record([s.image_id.to_string(), name.clone(), s.score.to_string()]).map_err(csv_err)?;
    }
    let csv = csv.into_inner().map_err(|e| CliError::Data(anyhow!("csv: {e}")))?;
    let selection: String = selected.iter().map(|id| format!("{id}\n")).collect();

    let out = ObservabilityOutputs {
        heatmap: cfg.output_dir.join(HEATMAP_FILE),
        scores: cfg.output_dir.join(SCORES_FILE),
        selection: cfg.output_dir.join(SELECTION_FILE),
        ranking,
        selected,
    };
    write(&out.heatmap, &ply)?;
    write(&out.scores, &csv)?;
    write(&out.selection, selection.as_bytes())?;
    info!("selected cameras {:?}", out.selected);
    Ok(out)
}

/// Reads a selection file: one image id per line, `#` comments allowed.
pub fn read_selection(path: &Path) -> Result<Vec<ImageId>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<ImageId>()
                .map_err(|_| CliError::Data(anyhow!("{}: bad image id {l:?}", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutputs {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub valid: PathBuf,
    /// Splat sources only.
    pub alpha: Option<PathBuf>,
}

/// Renders one view: image PNG, z-depth PFM (invalid pixels 0) and the
/// validity mask.
pub fn cmd_render(cfg: &PipelineConfig, image_id: ImageId) -> Result<RenderOutputs, CliError> {
    let model = load_model(cfg)?;
    let (intr, pose) = model
        .view(image_id)
        .ok_or_else(|| CliError::Usage(format!("image {image_id} is not in the model")))?;
    let res = cfg.resolution.unwrap_or_else(|| intr.resolution());
    let dir = cfg.output_dir.join("render");
    let stem = format!("{}_{:04}", cfg.scene_name, image_id);
    let mut out = RenderOutputs {
        image: dir.join(format!("{stem}.png")),
        depth: dir.join(format!("{stem}_depth.pfm")),
        valid: dir.join(format!("{stem}_valid.png")),
        alpha: None,
    };
    let (png, depth) = match cfg.render_source()? {
        SourcePath::Mesh(p) => {
            let accel = load_accel(cfg, &p)?;
            let hits = raycast_hits(&accel, intr, pose, res);
            let gray: Vec<u8> = shade_hits(&hits, pose).as_slice().iter().map(|s| (s * 255.0).round() as u8).collect();
            let depth = splatstereo::raster::DepthMap::from_values(hits.map(|h| h.map_or(0.0, |(_, z)| z)));
            (encode_gray8(res.width, res.height, &gray).context("png")?, depth)
        }
        SourcePath::Splats(p) => {
            let scene = load_splat_scene(&p)?;
            let r = render_splats_with(&scene, intr, pose, res, &render_options(cfg));
            let alpha: Vec<f32> = r.alpha.values.as_slice().iter().map(|a| *a as f32).collect();
            let alpha_path = dir.join(format!("{stem}_alpha.pfm"));
            write(&alpha_path, &pfm::encode_pfm(res.width, res.height, &alpha))?;
            out.alpha = Some(alpha_path);
            (encode_rgb8(&r.image).context("png")?, r.depth)
        }
    };
    let data: Vec<f32> = depth.values.as_slice().iter().map(|z| *z as f32).collect();
    write(&out.image, &png)?;
    write(&out.depth, &pfm::encode_pfm(res.width, res.height, &data))?;
    write(&out.valid, &encode_mask(&depth.valid).context("png")?)?;
    Ok(out)
}

/// Writes one stereo pair per (selected camera, baseline). Cameras come
/// from `selection`, else the configured list, else the observability
/// ranking when the source is a mesh.
pub fn cmd_synth(cfg: &PipelineConfig, selection: Option<&Path>) -> Result<DatasetManifest, CliError> {
    if cfg.baselines.is_empty() {
        return Err(CliError::Usage("synth needs at least one baseline".into()));
    }
    let source = cfg.render_source()?;
    let model = load_model(cfg)?;
    let explicit = match selection {
        Some(p) => Some(read_selection(p)?),
        None => cfg.cameras.clone(),
    };
    let mut opts = SynthOptions::new(cfg.scene_name.clone());
    opts.resolution = cfg.resolution;
    opts.occlusion_tolerance_px = cfg.occlusion_tolerance_px;
    let manifest = match source {
        SourcePath::Mesh(p) => {
            let accel = load_accel(cfg, &p)?;
            let ids = match explicit {
                Some(ids) => ids,
                None => {
                    let (ranking, _) = rank_cameras(cfg, &accel, &model)?;
                    let ids = select_top_k(&ranking, cfg.top_k_cameras);
                    info!("auto-selected cameras {ids:?}");
                    ids
                }
            };
            synth_dataset(RenderSource::Mesh(&accel), &model, &ids, &cfg.baselines, &cfg.output_dir, &opts)
        }
        SourcePath::Splats(p) => {
            let ids = explicit.ok_or_else(|| {
                CliError::Usage("splat sources need cameras: pass --cameras or --selection, or use a mesh source".into())
            })?;
            let scene = load_splat_scene(&p)?;
            let ro = render_options(cfg);
            synth_dataset(RenderSource::Splats(&scene, &ro), &model, &ids, &cfg.baselines, &cfg.output_dir, &opts)
        }
    }
    .context("dataset synthesis")?;
    info!("wrote {} pairs to {}", manifest.entries.len(), cfg.output_dir.display());
    Ok(manifest)
}

/// Loads a disparity map by extension: PFM, or 16-bit PNG storing `d·256`.
pub fn load_disparity(path: &Path) -> Result<DisparityMap, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
    match ext.as_deref() {
        Some("pfm") => Ok(pfm::decode_disparity(Cursor::new(bytes)).with_context(|| path.display().to_string())?),
        Some("png") => Ok(decode_disparity_png16(&bytes).with_context(|| path.display().to_string())?),
        _ => Err(CliError::Data(anyhow!("{}: unsupported disparity format", path.display()))),
    }
}

/// One ground-truth pair to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct GtPair {
    pub id: String,
    pub disparity: PathBuf,
    pub noc: Option<PathBuf>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Ground truth from a manifest file, a dataset directory holding one, or
/// a `disp/` + optional `noc/` directory layout.
pub fn load_gt_set(gt: &Path) -> Result<(Option<String>, Vec<GtPair>), CliError> {
    let manifest_path = if gt.is_dir() { gt.join(MANIFEST_FILE) } else { gt.to_path_buf() };
    if manifest_path.is_file() {
        let m = DatasetManifest::load(&manifest_path).with_context(|| manifest_path.display().to_string())?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let pairs = m
            .entries
            .iter()
            .map(|e| GtPair {
                id: stem(&e.disparity),
                disparity: base.join(&e.disparity),
                noc: Some(base.join(&e.noc)),
            })
            .collect();
        return Ok((Some(m.scene), pairs));
    }
    let disp_dir = gt.join("disp");
    let rd = std::fs::read_dir(&disp_dir).map_err(|e| CliError::io(&disp_dir, e))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pfm" | "png")))
        .collect();
    files.sort();
    let pairs = files
        .into_iter()
        .map(|d| {
            let id = stem(&d);
            let noc = gt.join("noc").join(format!("{id}.png"));
            GtPair {
                noc: noc.is_file().then_some(noc),
                id,
                disparity: d,
            }
        })
        .collect();
    Ok((None, pairs))
}

fn find_prediction(pred_dir: &Path, pair: &GtPair) -> Result<PathBuf, CliError> {
    let candidates = [
        pred_dir.join(format!("{}.pfm", pair.id)),
        pred_dir.join(format!("{}.png", pair.id)),
        pred_dir.join("disp").join(format!("{}.pfm", pair.id)),
    ];
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| CliError::Data(anyhow!("no prediction for {} in {}", pair.id, pred_dir.display())))
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pred_dir: PathBuf,
    pub gt: PathBuf,
    pub family: Option<DatasetFamily>,
    /// Overrides the family threshold.
    pub tau: Option<f64>,
    /// Row label; defaults to the family name, then the scene name.
    pub name: Option<String>,
    pub weighting: Weighting,
    pub json: Option<PathBuf>,
    pub strict: bool,
    /// With `strict`, fail when the All percentage exceeds this.
    pub max_bad_pct: Option<f64>,
}

/// Evaluates predictions against ground truth with the bad-τ metric and
/// prints the table; the JSON twin goes to `args.json` when set.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let (scene, pairs) = load_gt_set(&args.gt)?;
    if pairs.is_empty() {
        return Err(CliError::Data(anyhow!("{}: no ground-truth pairs", args.gt.display())));
    }
    let family = args.family.or_else(|| scene.as_deref().and_then(|s| s.parse().ok()));
    let tau = match (args.tau, family) {
        (Some(t), _) => t,
        (None, Some(f)) => f.tau(),
        (None, None) => return Err(CliError::Usage("pass --family or --tau".into())),
    };
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(CliError::Usage(format!("tau must be non-negative, got {tau}")));
    }
    let name = args
        .name
        .clone()
        .or_else(|| family.map(|f| f.name().to_string()))
        .or(scene)
        .unwrap_or_else(|| "dataset".into());
    let config = EvalConfig::new(name, tau);
    let results = pairs
        .par_iter()
        .map(|pair| {
            let gt = load_disparity(&pair.disparity)?;
            let pred = load_disparity(&find_prediction(&args.pred_dir, pair)?)?;
            let noc: Mask = match &pair.noc {
                Some(p) => {
                    let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
                    decode_mask(&bytes).with_context(|| p.display().to_string())?
                }
                None => gt.valid.clone(),
            };
            let result = evaluate_pair(&pred, &gt, &noc, &config).with_context(|| format!("pair {}", pair.id))?;
            Ok(NamedPair {
                id: pair.id.clone(),
                result,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = EvalReport::new(vec![(config, results)], args.weighting).context("aggregation")?;
    print!("{}", render_report(&report));
    if let Some(p) = &args.json {
        write(p, report_json(&report).as_bytes())?;
    }
    if args.strict {
        if let (Some(max), Some(all)) = (args.max_bad_pct, report.suite_all_pct) {
            if all > max {
                return Err(CliError::Failed(format!("All error {all:.2}% exceeds {max:.2}%")));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSuggestion {
    pub source: String,
    pub baseline: f64,
    pub median_disparity: f64,
    pub suggested_baseline: f64,
}

/// A disparity file and its `(focal length, baseline)` when known.
type HistogramInput = (PathBuf, Option<(f64, f64)>);

/// Expands inputs into disparity files with their rig, when known.
fn histogram_inputs(inputs: &[PathBuf]) -> Result<Vec<HistogramInput>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        let manifest = if input.is_dir() { input.join(MANIFEST_FILE) } else { input.clone() };
        if manifest.extension().is_some_and(|e| e == "json") {
            let m = DatasetManifest::load(&manifest).with_context(|| manifest.display().to_string())?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            out.extend(m.entries.iter().map(|e| (base.join(&e.disparity), Some((e.focal_length, e.baseline)))));
        } else {
            out.push((input.clone(), None));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramOutput {
    pub bins: Vec<(f64, usize)>,
    pub suggestions: Vec<BaselineSuggestion>,
}

/// Pooled disparity histogram as CSV `bin_start,count`. With a target
/// disparity, also suggests a baseline per manifest entry.
pub fn cmd_histogram(
    inputs: &[PathBuf],
    bin_width: f64,
    output: Option<&Path>,
    target_disparity: Option<f64>,
) -> Result<HistogramOutput, CliError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(CliError::Usage(format!("bin width must be positive, got {bin_width}")));
    }
    if let Some(t) = target_disparity {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("target disparity must be positive, got {t}")));
        }
    }
    let files = histogram_inputs(inputs)?;
    let mut pooled: BTreeMap<i64, usize> = BTreeMap::new();
    let mut suggestions = Vec::new();
    for (path, rig) in &files {
        let d = load_disparity(path)?;
        for (start, n) in disparity_histogram(&d, bin_width) {
            *pooled.entry((start / bin_width).round() as i64).or_default() += n;
        }
        if let (Some(target), Some((f, b))) = (target_disparity, rig) {
            let depth = disparity_to_depth(&d, *f, *b);
            if let (Some(z), Some(sb)) = (median_depth(&depth), suggest_baseline(&depth, *f, target)) {
                suggestions.push(BaselineSuggestion {
                    source: path.display().to_string(),
                    baseline: *b,
                    median_disparity: f * b / z,
                    suggested_baseline: sb,
                });
            }
        }
    }
    let bins: Vec<(f64, usize)> = pooled.into_iter().map(|(k, n)| (k as f64 * bin_width, n)).collect();
    let mut csv = String::from("bin_start,count\n");
    for (start, n) in &bins {
        csv.push_str(&format!("{start},{n}\n"));
    }
    match output {
        Some(p) => write(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    for s in &suggestions {
        eprintln!(
            "{}: baseline {} gives median disparity {:.3} px; suggested baseline {:.6}",
            s.source, s.baseline, s.median_disparity, s.suggested_baseline
        );
    }
    Ok(HistogramOutput { bins, suggestions })
}

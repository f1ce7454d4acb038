//! Per-scene pipeline configuration: a TOML file overridden by flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use splatstereo::colmap::{ImageId, DEFAULT_PRINCIPAL_POINT_TOLERANCE};
use splatstereo::observability::{DEFAULT_GRAZING_LIMIT_DEG, DEFAULT_TOP_K};
use splatstereo::raster::Resolution;
use splatstereo::stereo::DEFAULT_OCCLUSION_TOLERANCE;

use crate::CliError;

/// Keys accepted in a configuration file. Relative `scene_dir`,
/// `mesh_path`, `splat_path` and `output_dir` are resolved against the
/// file's directory; `colmap_subdir` is relative to the scene directory.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scene_dir: Option<PathBuf>,
    pub scene_name: Option<String>,
    pub colmap_subdir: Option<PathBuf>,
    pub mesh_path: Option<PathBuf>,
    pub splat_path: Option<PathBuf>,
    pub grazing_limit_deg: Option<f64>,
    pub grazing_filter: Option<bool>,
    pub top_k_cameras: Option<usize>,
    pub cameras: Option<Vec<ImageId>>,
    pub baselines: Option<Vec<f64>>,
    pub resolution: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub largest_cluster: Option<bool>,
    pub alpha_threshold: Option<f64>,
    pub occlusion_tolerance_px: Option<f64>,
    pub principal_point_tolerance: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.scene_dir, &mut cfg.mesh_path, &mut cfg.splat_path, &mut cfg.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fills every key unset here from `lower`.
    pub fn or(self, lower: ConfigFile) -> ConfigFile {
        ConfigFile {
            scene_dir: self.scene_dir.or(lower.scene_dir),
            scene_name: self.scene_name.or(lower.scene_name),
            colmap_subdir: self.colmap_subdir.or(lower.colmap_subdir),
            mesh_path: self.mesh_path.or(lower.mesh_path),
            splat_path: self.splat_path.or(lower.splat_path),
            grazing_limit_deg: self.grazing_limit_deg.or(lower.grazing_limit_deg),
            grazing_filter: self.grazing_filter.or(lower.grazing_filter),
            top_k_cameras: self.top_k_cameras.or(lower.top_k_cameras),
            cameras: self.cameras.or(lower.cameras),
            baselines: self.baselines.or(lower.baselines),
            resolution: self.resolution.or(lower.resolution),
            output_dir: self.output_dir.or(lower.output_dir),
            largest_cluster: self.largest_cluster.or(lower.largest_cluster),
            alpha_threshold: self.alpha_threshold.or(lower.alpha_threshold),
            occlusion_tolerance_px: self.occlusion_tolerance_px.or(lower.occlusion_tolerance_px),
            principal_point_tolerance: self.principal_point_tolerance.or(lower.principal_point_tolerance),
        }
    }
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_resolution(s: &str) -> Result<Resolution, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("resolution must be positive, got {s:?}"));
    }
    Ok(Resolution::new(w, h))
}

/// Where views are rendered from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourcePath {
    Mesh(PathBuf),
    Splats(PathBuf),
}

/// Fully resolved settings for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene_dir: PathBuf,
    pub scene_name: String,
    pub colmap_subdir: PathBuf,
    pub mesh_path: Option<PathBuf>,
    pub splat_path: Option<PathBuf>,
    /// `None` disables the grazing-angle filter.
    pub grazing_limit_deg: Option<f64>,
    pub top_k_cameras: usize,
    /// Explicit camera selection; otherwise chosen by observability.
    pub cameras: Option<Vec<ImageId>>,
    pub baselines: Vec<f64>,
    pub resolution: Option<Resolution>,
    pub output_dir: PathBuf,
    pub largest_cluster: bool,
    pub alpha_threshold: f64,
    pub occlusion_tolerance_px: f64,
    pub principal_point_tolerance: f64,
}

impl PipelineConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, CliError> {
        let usage = |m: String| CliError::Usage(m);
        let scene_dir = file.scene_dir.unwrap_or_else(|| PathBuf::from("."));
        let scene_name = match file.scene_name {
            Some(n) => n,
            None => scene_dir
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "scene".into()),
        };
        let grazing = file.grazing_limit_deg.unwrap_or(DEFAULT_GRAZING_LIMIT_DEG);
        if !(grazing > 0.0 && grazing <= 90.0) {
            return Err(usage(format!("grazing_limit_deg must be in (0, 90], got {grazing}")));
        }
        let top_k = file.top_k_cameras.unwrap_or(DEFAULT_TOP_K);
        if top_k == 0 {
            return Err(usage("top_k_cameras must be at least 1".into()));
        }
        let baselines = file.baselines.unwrap_or_default();
        if let Some(b) = baselines.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(usage(format!("baselines must be positive, got {b}")));
        }
        let alpha_threshold = file.alpha_threshold.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&alpha_threshold) {
            return Err(usage(format!("alpha_threshold must be in [0, 1], got {alpha_threshold}")));
        }
        let occlusion_tolerance_px = file.occlusion_tolerance_px.unwrap_or(DEFAULT_OCCLUSION_TOLERANCE);
        if !(occlusion_tolerance_px > 0.0) {
            return Err(usage(format!("occlusion_tolerance_px must be positive, got {occlusion_tolerance_px}")));
        }
        let principal_point_tolerance = file.principal_point_tolerance.unwrap_or(DEFAULT_PRINCIPAL_POINT_TOLERANCE);
        if !(principal_point_tolerance > 0.0 && principal_point_tolerance <= 0.5) {
            return Err(usage(format!(
                "principal_point_tolerance must be in (0, 0.5], got {principal_point_tolerance}"
            )));
        }
        Ok(Self {
            scene_name,
            colmap_subdir: file.colmap_subdir.unwrap_or_else(|| PathBuf::from("sparse/0")),
            mesh_path: file.mesh_path,
            splat_path: file.splat_path,
            grazing_limit_deg: file.grazing_filter.unwrap_or(true).then_some(grazing),
            top_k_cameras: top_k,
            cameras: file.cameras,
            baselines,
            resolution: file.resolution.as_deref().map(parse_resolution).transpose().map_err(usage)?,
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("output")),
            largest_cluster: file.largest_cluster.unwrap_or(false),
            alpha_threshold,
            occlusion_tolerance_px,
            principal_point_tolerance,
            scene_dir,
        })
    }

    pub fn colmap_dir(&self) -> PathBuf {
        self.scene_dir.join(&self.colmap_subdir)
    }

    /// The single render source; both or neither set is a usage error.
    pub fn render_source(&self) -> Result<SourcePath, CliError> {
        match (&self.mesh_path, &self.splat_path) {
            (Some(m), None) => Ok(SourcePath::Mesh(m.clone())),
            (None, Some(s)) => Ok(SourcePath::Splats(s.clone())),
            (Some(_), Some(_)) => Err(CliError::Usage("set exactly one of mesh_path and splat_path, not both".into())),
            (None, None) => Err(CliError::Usage("a render source is required: set mesh_path or splat_path".into())),
        }
    }

    pub fn require_mesh(&self) -> Result<&Path, CliError> {
        self.mesh_path
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs mesh_path".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::resolve(ConfigFile::default()).unwrap();
        assert_eq!(c.grazing_limit_deg, Some(80.0));
        assert_eq!(c.top_k_cameras, 5);
        assert_eq!(c.alpha_threshold, 0.5);
        assert_eq!(c.colmap_subdir, PathBuf::from("sparse/0"));
    }

    #[test]
    fn flags_override_file_values() {
        let file = ConfigFile::parse("top_k_cameras = 3\nbaselines = [0.1, 0.2]\nresolution = \"320x240\"\n").unwrap();
        let flags = ConfigFile {
            top_k_cameras: Some(7),
            ..Default::default()
        };
        let c = PipelineConfig::resolve(flags.or(file)).unwrap();
        assert_eq!(c.top_k_cameras, 7);
        assert_eq!(c.baselines, vec![0.1, 0.2]);
        assert_eq!(c.resolution, Some(Resolution::new(320, 240)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ConfigFile::parse("top_k = 3"), Err(CliError::Usage(_))));
    }

    #[test]
    fn disabling_the_grazing_filter() {
        let c = PipelineConfig::resolve(ConfigFile::parse("grazing_filter = false").unwrap()).unwrap();
        assert_eq!(c.grazing_limit_deg, None);
    }

    #[test]
    fn render_source_must_be_unique() {
        let both = ConfigFile::parse("mesh_path = \"a.ply\"\nsplat_path = \"b.ply\"").unwrap();
        assert!(PipelineConfig::resolve(both).unwrap().render_source().is_err());
        let none = PipelineConfig::resolve(ConfigFile::default()).unwrap();
        assert!(none.render_source().is_err());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for text in ["grazing_limit_deg = 120.0", "top_k_cameras = 0", "baselines = [0.1, -1.0]", "resolution = \"12\""] {
            assert!(matches!(PipelineConfig::resolve(ConfigFile::parse(text).unwrap()), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn resolution_strings() {
        assert_eq!(parse_resolution("64x48"), Ok(Resolution::new(64, 48)));
        assert!(parse_resolution("0x48").is_err());
        assert!(parse_resolution("64").is_err());
    }
}

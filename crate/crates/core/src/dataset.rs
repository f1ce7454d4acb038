//! Stereo training-set synthesis: one rectified pair per (camera, baseline).
//!
//! Layout under the output directory:
//!
//! ```text
//! left/<scene>_<image id>_b<k>.png    left view
//! right/<scene>_<image id>_b<k>.png   right view
//! disp/<scene>_<image id>_b<k>.pfm    left disparity, invalid pixels 0
//! valid/<scene>_<image id>_b<k>.png   255 where the disparity is valid
//! noc/<scene>_<image id>_b<k>.png     255 where valid and non-occluded
//! manifest.json
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colmap::{CameraIntrinsics, ImageId, PosedImage, SceneModel};
use crate::formats::png::{encode_gray8, encode_mask, encode_rgb8, PngError};
use crate::formats::{pfm, write_atomic};
use crate::mesh::AcceleratedMesh;
use crate::raster::{DepthMap, DisparityMap, Mask, Resolution};
use crate::raycast::{raycast_hits, shade_hits};
use crate::splat::{render_splats_with, RenderOptions, SplatScene};
use crate::stereo::{depth_to_disparity, make_right_camera, occlusion_mask, StereoError, DEFAULT_OCCLUSION_TOLERANCE};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("image {0} is not in the scene model")]
    UnknownImage(ImageId),
    #[error("no baselines given")]
    NoBaselines,
    #[error("rendering image {image_id} at baseline {baseline} produced no valid depth")]
    RenderFailure { image_id: ImageId, baseline: f64 },
    #[error(transparent)]
    Stereo(#[from] StereoError),
    #[error(transparent)]
    Png(#[from] PngError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to render views from.
#[derive(Debug, Clone, Copy)]
pub enum RenderSource<'a> {
    /// Ray-cast depth; images are grey headlight-shaded renders.
    Mesh(&'a AcceleratedMesh),
    /// Composited colour and alpha-normalized depth.
    Splats(&'a SplatScene, &'a RenderOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub scene_name: String,
    /// Overrides the native camera resolution.
    pub resolution: Option<Resolution>,
    pub occlusion_tolerance_px: f64,
}

impl SynthOptions {
    pub fn new(scene_name: impl Into<String>) -> Self {
        Self {
            scene_name: scene_name.into(),
            resolution: None,
            occlusion_tolerance_px: DEFAULT_OCCLUSION_TOLERANCE,
        }
    }
}

/// One stereo pair. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene: String,
    pub image_id: ImageId,
    pub image_name: String,
    pub left: PathBuf,
    pub right: PathBuf,
    pub disparity: PathBuf,
    pub valid: PathBuf,
    pub noc: PathBuf,
    pub baseline: f64,
    pub focal_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub scene: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// JSON array of entries.
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        let mut s = serde_json::to_string_pretty(&self.entries)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let entries: Vec<ManifestEntry> = serde_json::from_str(text)?;
        let scene = entries.first().map(|e| e.scene.clone()).unwrap_or_default();
        Ok(Self { scene, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }
}

/// Rendered view: an image encoded as PNG plus its depth.
struct View {
    png: Vec<u8>,
    depth: DepthMap,
}

fn render_view(source: &RenderSource<'_>, intr: &CameraIntrinsics, pose: &PosedImage, res: Resolution) -> Result<View, DatasetError> {
    match source {
        RenderSource::Mesh(accel) => {
            let hits = raycast_hits(accel, intr, pose, res);
            let shade = shade_hits(&hits, pose);
            let gray: Vec<u8> = shade.as_slice().iter().map(|s| (s * 255.0).round() as u8).collect();
            let depth = DepthMap::from_values(hits.map(|h| h.map_or(0.0, |(_, z)| z)));
            Ok(View {
                png: encode_gray8(res.width, res.height, &gray)?,
                depth,
            })
        }
        RenderSource::Splats(scene, opts) => {
            let r = render_splats_with(scene, intr, pose, res, opts);
            Ok(View {
                png: encode_rgb8(&r.image)?,
                depth: r.depth,
            })
        }
    }
}

/// Products of one (camera, baseline) job before they are written.
pub struct PairProducts {
    pub left_png: Vec<u8>,
    pub right_png: Vec<u8>,
    pub left_disparity: DisparityMap,
    pub right_disparity: DisparityMap,
    pub noc: Mask,
    pub focal_length: f64,
}

/// Renders one rectified pair and derives disparities and the noc mask.
pub fn synth_pair(
    source: &RenderSource<'_>,
    intr: &CameraIntrinsics,
    left: &PosedImage,
    baseline: f64,
    res: Resolution,
    occlusion_tolerance_px: f64,
) -> Result<PairProducts, DatasetError> {
    let right = make_right_camera(left, baseline)?;
    let intr = if intr.resolution() == res {
        intr.clone()
    } else {
        intr.scaled_to(res)
    };
    let l = render_view(source, &intr, left, res)?;
    if l.depth.valid_count() == 0 {
        return Err(DatasetError::RenderFailure {
            image_id: left.image_id,
            baseline,
        });
    }
    let r = render_view(source, &intr, &right, res)?;
    let f = intr.fx;
    let left_disparity = depth_to_disparity(&l.depth, f, baseline);
    let right_disparity = depth_to_disparity(&r.depth, f, baseline);
    let noc = occlusion_mask(&left_disparity, &right_disparity, occlusion_tolerance_px)?;
    Ok(PairProducts {
        left_png: l.png,
        right_png: r.png,
        left_disparity,
        right_disparity,
        noc,
        focal_length: f,
    })
}

/// Renders and writes one stereo pair per (selected image, baseline) and
/// the manifest. Entries are ordered by selection order, then baseline
/// order, independent of how jobs are scheduled.
pub fn synth_dataset(
    source: RenderSource<'_>,
    model: &SceneModel,
    selected: &[ImageId],
    baselines: &[f64],
    out_dir: impl AsRef<Path>,
    opts: &SynthOptions,
) -> Result<DatasetManifest, DatasetError> {
    let out_dir = out_dir.as_ref();
    if baselines.is_empty() {
        return Err(DatasetError::NoBaselines);
    }
    let mut jobs = Vec::new();
    for &id in selected {
        let (intr, pose) = model.view(id).ok_or(DatasetError::UnknownImage(id))?;
        for (k, &b) in baselines.iter().enumerate() {
            make_right_camera(pose, b)?;
            jobs.push((intr, pose, k, b));
        }
    }
    let entries = jobs
        .par_iter()
        .map(|&(intr, pose, k, b)| {
            let res = opts.resolution.unwrap_or_else(|| intr.resolution());
            let p = synth_pair(&source, intr, pose, b, res, opts.occlusion_tolerance_px)?;
            let stem = format!("{}_{:04}_b{}", opts.scene_name, pose.image_id, k);
            let rel = |dir: &str, ext: &str| PathBuf::from(dir).join(format!("{stem}.{ext}"));
            let entry = ManifestEntry {
                scene: opts.scene_name.clone(),
                image_id: pose.image_id,
                image_name: pose.name.clone(),
                left: rel("left", "png"),
                right: rel("right", "png"),
                disparity: rel("disp", "pfm"),
                valid: rel("valid", "png"),
                noc: rel("noc", "png"),
                baseline: b,
                focal_length: p.focal_length,
            };
            write_atomic(out_dir.join(&entry.left), &p.left_png)?;
            write_atomic(out_dir.join(&entry.right), &p.right_png)?;
            write_atomic(out_dir.join(&entry.disparity), &pfm::encode_disparity(&p.left_disparity))?;
            write_atomic(out_dir.join(&entry.valid), &encode_mask(&p.left_disparity.valid)?)?;
            write_atomic(out_dir.join(&entry.noc), &encode_mask(&p.noc)?)?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let manifest = DatasetManifest {
        scene: opts.scene_name.clone(),
        entries,
    };
    write_atomic(out_dir.join(MANIFEST_FILE), manifest.to_json()?.as_bytes())?;
    Ok(manifest)
}

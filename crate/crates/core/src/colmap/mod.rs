//! COLMAP sparse-model reading and pinhole camera geometry.
//!
//! Only `cameras` and `images` are read; `points3D` is never touched. Both the
//! whitespace-delimited text format and the little-endian binary format are
//! supported (<https://colmap.github.io/format.html>). When both encodings of
//! a file are present the binary one wins.
//!
//! Poses follow COLMAP's convention: a world point `X` maps to the camera
//! frame as `R·X + t`, with `x` right, `y` down and `z` forward. Image
//! coordinates put the top-left corner of the top-left pixel at `(0, 0)`.

mod binary;
mod camera;
mod text;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use serde::Serialize;
use thiserror::Error;

pub use crate::geometry::Ray;
use crate::geometry::Vec3;
use crate::raster::Resolution;
pub use binary::{read_cameras_binary, read_images_binary, write_binary_model};
pub use camera::{camera_ray, project, ray_through, Projection};
pub use text::{read_cameras_text, read_images_text, write_text_model};

pub type CameraId = u32;
pub type ImageId = u32;

/// Default fraction of the image size a principal point may drift from the
/// image centre before it is reported.
pub const DEFAULT_PRINCIPAL_POINT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordLocation {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for RecordLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordLocation::Line(n) => write!(f, "line {n}"),
            RecordLocation::Offset(o) => write!(f, "byte offset {o}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ColmapError {
    #[error("missing COLMAP file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}: malformed record at {location}: {reason}")]
    MalformedRecord {
        file: String,
        location: RecordLocation,
        reason: String,
    },

    #[error("camera {camera_id}: unknown camera model {model}")]
    UnknownCameraModel { camera_id: CameraId, model: String },

    #[error("invalid scene model: {0}")]
    InvalidModel(String),

    #[error("non-finite camera input")]
    NonFiniteInput,

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Camera models accepted by the loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    OpenCv,
}

impl CameraModel {
    pub fn colmap_id(self) -> i32 {
        match self {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
            CameraModel::SimpleRadial => 2,
            CameraModel::OpenCv => 4,
        }
    }

    pub fn from_colmap_id(id: i32) -> Option<Self> {
        Some(match id {
            0 => CameraModel::SimplePinhole,
            1 => CameraModel::Pinhole,
            2 => CameraModel::SimpleRadial,
            4 => CameraModel::OpenCv,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
            CameraModel::OpenCv => "OPENCV",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "SIMPLE_PINHOLE" => CameraModel::SimplePinhole,
            "PINHOLE" => CameraModel::Pinhole,
            "SIMPLE_RADIAL" => CameraModel::SimpleRadial,
            "OPENCV" => CameraModel::OpenCv,
            _ => return None,
        })
    }

    /// Number of parameters COLMAP stores for this model.
    pub fn num_params(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
            CameraModel::SimpleRadial => 4,
            CameraModel::OpenCv => 8,
        }
    }

    pub fn num_distortion(self) -> usize {
        match self {
            CameraModel::SimplePinhole | CameraModel::Pinhole => 0,
            CameraModel::SimpleRadial => 1,
            CameraModel::OpenCv => 4,
        }
    }
}

/// Intrinsics of one COLMAP camera.
///
/// Distortion coefficients are kept for round-tripping but all projection in
/// this crate treats the camera as an ideal pinhole.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraIntrinsics {
    pub camera_id: CameraId,
    pub model: CameraModel,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub distortion: Vec<f64>,
}

impl CameraIntrinsics {
    /// Ideal pinhole camera.
    pub fn pinhole(
        camera_id: CameraId,
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
    ) -> Self {
        Self {
            camera_id,
            model: CameraModel::Pinhole,
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            distortion: Vec::new(),
        }
    }

    /// Builds intrinsics from a COLMAP parameter vector.
    pub fn from_params(
        camera_id: CameraId,
        model: CameraModel,
        width: usize,
        height: usize,
        params: &[f64],
    ) -> Result<Self, String> {
        if params.len() != model.num_params() {
            return Err(format!(
                "{} expects {} parameters, found {}",
                model.name(),
                model.num_params(),
                params.len()
            ));
        }
        let (fx, fy, cx, cy, rest) = match model {
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => {
                (params[0], params[0], params[1], params[2], &params[3..])
            }
            CameraModel::Pinhole | CameraModel::OpenCv => {
                (params[0], params[1], params[2], params[3], &params[4..])
            }
        };
        let intr = Self {
            camera_id,
            model,
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            distortion: rest.to_vec(),
        };
        intr.check()?;
        Ok(intr)
    }

    /// COLMAP parameter vector for this camera.
    pub fn params(&self) -> Vec<f64> {
        let mut p = match self.model {
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => vec![self.fx, self.cx, self.cy],
            CameraModel::Pinhole | CameraModel::OpenCv => vec![self.fx, self.fy, self.cx, self.cy],
        };
        p.extend_from_slice(&self.distortion);
        p
    }

    fn check(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err(format!("camera {}: zero image size", self.camera_id));
        }
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .chain(&self.distortion)
            .all(|v| v.is_finite());
        if !finite {
            return Err(format!("camera {}: non-finite parameter", self.camera_id));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(format!("camera {}: non-positive focal length", self.camera_id));
        }
        if self.distortion.len() != self.model.num_distortion() {
            return Err(format!(
                "camera {}: {} distortion coefficients for {}",
                self.camera_id,
                self.distortion.len(),
                self.model.name()
            ));
        }
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }

    /// Intrinsics rescaled to render at `res` instead of the native size.
    pub fn scaled_to(&self, res: Resolution) -> Self {
        let sx = res.width as f64 / self.width as f64;
        let sy = res.height as f64 / self.height as f64;
        Self {
            width: res.width,
            height: res.height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            ..self.clone()
        }
    }
}

/// A registered image: world→camera rigid transform plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedImage {
    pub image_id: ImageId,
    pub camera_id: CameraId,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
    pub name: String,
}

impl PosedImage {
    /// Builds a pose from a raw `w, x, y, z` quaternion, renormalizing it.
    pub fn from_wxyz(
        image_id: ImageId,
        camera_id: CameraId,
        qvec: [f64; 4],
        translation: Vec3,
        name: impl Into<String>,
    ) -> Option<Self> {
        let q = Quaternion::new(qvec[0], qvec[1], qvec[2], qvec[3]);
        let n = q.norm();
        if !(n.is_finite() && n > 0.0) || !translation.iter().all(|c| c.is_finite()) {
            return None;
        }
        Some(Self {
            image_id,
            camera_id,
            rotation: UnitQuaternion::from_quaternion(q),
            translation,
            name: name.into(),
        })
    }

    /// Quaternion as `[w, x, y, z]`.
    pub fn qvec(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera centre in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.inverse() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn camera_to_world_dir(&self, d: &Vec3) -> Vec3 {
        self.rotation.inverse() * d
    }
}

/// Parsed COLMAP model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneModel {
    pub cameras: BTreeMap<CameraId, CameraIntrinsics>,
    pub images: BTreeMap<ImageId, PosedImage>,
}

impl SceneModel {
    /// Checks that every image references a known camera and that image
    /// names are unique.
    pub fn validate(&self) -> Result<(), ColmapError> {
        let mut names = HashSet::new();
        for img in self.images.values() {
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(ColmapError::InvalidModel(format!(
                    "image {} references unknown camera {}",
                    img.image_id, img.camera_id
                )));
            }
            if !names.insert(img.name.as_str()) {
                return Err(ColmapError::InvalidModel(format!(
                    "duplicate image name {:?}",
                    img.name
                )));
            }
        }
        Ok(())
    }

    /// Intrinsics of the camera that took `image_id`.
    pub fn view(&self, image_id: ImageId) -> Option<(&CameraIntrinsics, &PosedImage)> {
        let img = self.images.get(&image_id)?;
        let cam = self.cameras.get(&img.camera_id)?;
        Some((cam, img))
    }

    pub fn image_by_name(&self, name: &str) -> Option<&PosedImage> {
        self.images.values().find(|img| img.name == name)
    }
}

fn pick(dir: &Path, stem: &str) -> Result<(PathBuf, bool), ColmapError> {
    let bin = dir.join(format!("{stem}.bin"));
    if bin.is_file() {
        return Ok((bin, true));
    }
    let txt = dir.join(format!("{stem}.txt"));
    if txt.is_file() {
        return Ok((txt, false));
    }
    Err(ColmapError::MissingFile(bin))
}

/// Loads `cameras` and `images` from a COLMAP sparse directory.
pub fn load_scene_model(dir: impl AsRef<Path>) -> Result<SceneModel, ColmapError> {
    let dir = dir.as_ref();
    let (cam_path, cam_bin) = pick(dir, "cameras")?;
    let (img_path, img_bin) = pick(dir, "images")?;
    let cameras = if cam_bin {
        read_cameras_binary(&cam_path)?
    } else {
        read_cameras_text(&cam_path)?
    };
    let images = if img_bin {
        read_images_binary(&img_path)?
    } else {
        read_images_text(&img_path)?
    };
    let model = SceneModel { cameras, images };
    model.validate()?;
    Ok(model)
}

/// A camera whose principal point is off-centre by more than the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalPointWarning {
    pub camera_id: CameraId,
    pub width: usize,
    pub height: usize,
    pub cx: f64,
    pub cy: f64,
    /// `cx - width/2`
    pub offset_x: f64,
    /// `cy - height/2`
    pub offset_y: f64,
}

impl fmt::Display for PrincipalPointWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "camera {}: principal point ({:.3}, {:.3}) is off-centre by ({:+.3}, {:+.3}) px in a {}x{} image",
            self.camera_id, self.cx, self.cy, self.offset_x, self.offset_y, self.width, self.height
        )
    }
}

/// Reports cameras whose principal point lies farther than
/// `tolerance_fraction` of the image size from the image centre, per axis.
///
/// Panics unless `tolerance_fraction` is in `(0, 0.5]`.
pub fn validate_principal_point(
    model: &SceneModel,
    tolerance_fraction: f64,
) -> Vec<PrincipalPointWarning> {
    assert!(
        tolerance_fraction > 0.0 && tolerance_fraction <= 0.5,
        "tolerance_fraction must be in (0, 0.5], got {tolerance_fraction}"
    );
    model
        .cameras
        .values()
        .filter_map(|c| {
            let w = c.width as f64;
            let h = c.height as f64;
            let dx = c.cx - w / 2.0;
            let dy = c.cy - h / 2.0;
            (dx.abs() > tolerance_fraction * w || dy.abs() > tolerance_fraction * h).then_some({
                PrincipalPointWarning {
                    camera_id: c.camera_id,
                    width: c.width,
                    height: c.height,
                    cx: c.cx,
                    cy: c.cy,
                    offset_x: dx,
                    offset_y: dy,
                }
            })
        })
        .collect()
}

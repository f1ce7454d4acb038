use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{
    CameraId, CameraIntrinsics, CameraModel, ColmapError, ImageId, PosedImage, RecordLocation,
    SceneModel,
};
use crate::geometry::Vec3;

fn read_file(path: &Path) -> Result<String, ColmapError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ColmapError::MissingFile(path.to_path_buf()),
        _ => ColmapError::Io(e),
    })
}

struct LineCtx<'a> {
    file: &'a str,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, reason: impl Into<String>) -> ColmapError {
        ColmapError::MalformedRecord {
            file: self.file.to_string(),
            location: RecordLocation::Line(self.line),
            reason: reason.into(),
        }
    }

    fn parse<T: FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T, ColmapError> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("bad {what} {tok:?}")))
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Reads `cameras.txt`: `CAMERA_ID MODEL WIDTH HEIGHT PARAMS...` per line.
pub fn read_cameras_text(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<CameraId, CameraIntrinsics>, ColmapError> {
    let path = path.as_ref();
    let label = file_label(path);
    let content = read_file(path)?;
    let mut cameras = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let ctx = LineCtx {
            file: &label,
            line: i + 1,
        };
        let mut toks = line.split_whitespace();
        let camera_id: CameraId = ctx.parse(toks.next(), "camera id")?;
        let model_name = toks.next().ok_or_else(|| ctx.err("missing camera model"))?;
        let model = CameraModel::from_name(model_name).ok_or_else(|| {
            ColmapError::UnknownCameraModel {
                camera_id,
                model: model_name.to_string(),
            }
        })?;
        let width: usize = ctx.parse(toks.next(), "width")?;
        let height: usize = ctx.parse(toks.next(), "height")?;
        let params = toks
            .map(|t| ctx.parse::<f64>(Some(t), "parameter"))
            .collect::<Result<Vec<_>, _>>()?;
        let cam = CameraIntrinsics::from_params(camera_id, model, width, height, &params)
            .map_err(|e| ctx.err(e))?;
        if cameras.insert(camera_id, cam).is_some() {
            return Err(ctx.err(format!("duplicate camera id {camera_id}")));
        }
    }
    Ok(cameras)
}

/// Reads `images.txt`. Each image occupies two lines; the second (2D
/// observations) is consumed unparsed and may be empty.
pub fn read_images_text(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<ImageId, PosedImage>, ColmapError> {
    let path = path.as_ref();
    let label = file_label(path);
    let content = read_file(path)?;
    let mut images = BTreeMap::new();
    let mut lines = content.lines().enumerate();
    while let Some((i, line)) = lines.next() {
        if is_skippable(line) {
            continue;
        }
        let ctx = LineCtx {
            file: &label,
            line: i + 1,
        };
        let mut toks = line.split_whitespace();
        let image_id: ImageId = ctx.parse(toks.next(), "image id")?;
        let mut q = [0.0; 4];
        for (k, slot) in q.iter_mut().enumerate() {
            *slot = ctx.parse(toks.next(), &format!("quaternion component {k}"))?;
        }
        let mut t = Vec3::zeros();
        for k in 0..3 {
            t[k] = ctx.parse(toks.next(), &format!("translation component {k}"))?;
        }
        let camera_id: CameraId = ctx.parse(toks.next(), "camera id")?;
        // Names may contain spaces; everything after the camera id is the name.
        let rest: Vec<&str> = toks.collect();
        if rest.is_empty() {
            return Err(ctx.err("missing image name"));
        }
        let name = rest.join(" ");
        let img = PosedImage::from_wxyz(image_id, camera_id, q, t, name)
            .ok_or_else(|| ctx.err("degenerate quaternion or non-finite translation"))?;
        if images.insert(image_id, img).is_some() {
            return Err(ctx.err(format!("duplicate image id {image_id}")));
        }
        // POINTS2D line.
        lines.next();
    }
    Ok(images)
}

/// Writes `cameras.txt` and `images.txt` into `dir`. Floats use the shortest
/// representation that round-trips, so reading the text back is lossless.
pub fn write_text_model(model: &SceneModel, dir: impl AsRef<Path>) -> Result<(), ColmapError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut cams = Vec::new();
    writeln!(cams, "# Camera list with one line of data per camera:")?;
    writeln!(cams, "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]")?;
    writeln!(cams, "# Number of cameras: {}", model.cameras.len())?;
    for c in model.cameras.values() {
        write!(cams, "{} {} {} {}", c.camera_id, c.model.name(), c.width, c.height)?;
        for p in c.params() {
            write!(cams, " {p}")?;
        }
        writeln!(cams)?;
    }
    fs::write(dir.join("cameras.txt"), cams)?;

    let mut imgs = Vec::new();
    writeln!(imgs, "# Image list with two lines of data per image:")?;
    writeln!(imgs, "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME")?;
    writeln!(imgs, "#   POINTS2D[] as (X, Y, POINT3D_ID)")?;
    writeln!(imgs, "# Number of images: {}", model.images.len())?;
    for img in model.images.values() {
        let q = img.qvec();
        let t = img.translation;
        writeln!(
            imgs,
            "{} {} {} {} {} {} {} {} {} {}",
            img.image_id, q[0], q[1], q[2], q[3], t.x, t.y, t.z, img.camera_id, img.name
        )?;
        writeln!(imgs)?;
    }
    fs::write(dir.join("images.txt"), imgs)?;
    Ok(())
}

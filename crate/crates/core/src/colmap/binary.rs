use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{
    CameraId, CameraIntrinsics, CameraModel, ColmapError, ImageId, PosedImage, RecordLocation,
    SceneModel,
};
use crate::geometry::Vec3;

/// Bytes per skipped 2D observation: `f64 x, f64 y, i64 point3D_id`.
const POINT2D_BYTES: u64 = 24;

struct BinReader {
    file: String,
    cur: Cursor<Vec<u8>>,
}

impl BinReader {
    fn open(path: &Path) -> Result<Self, ColmapError> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ColmapError::MissingFile(path.to_path_buf()),
            _ => ColmapError::Io(e),
        })?;
        Ok(Self {
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            cur: Cursor::new(bytes),
        })
    }

    fn offset(&self) -> u64 {
        self.cur.position()
    }

    fn err_at(&self, offset: u64, reason: impl Into<String>) -> ColmapError {
        ColmapError::MalformedRecord {
            file: self.file.clone(),
            location: RecordLocation::Offset(offset),
            reason: reason.into(),
        }
    }

    fn truncated(&self) -> ColmapError {
        self.err_at(self.offset(), "unexpected end of file")
    }

    fn u64(&mut self) -> Result<u64, ColmapError> {
        self.cur.read_u64::<LittleEndian>().map_err(|_| self.truncated())
    }

    fn u32(&mut self) -> Result<u32, ColmapError> {
        self.cur.read_u32::<LittleEndian>().map_err(|_| self.truncated())
    }

    fn i32(&mut self) -> Result<i32, ColmapError> {
        self.cur.read_i32::<LittleEndian>().map_err(|_| self.truncated())
    }

    fn f64(&mut self) -> Result<f64, ColmapError> {
        self.cur.read_f64::<LittleEndian>().map_err(|_| self.truncated())
    }

    fn cstring(&mut self) -> Result<String, ColmapError> {
        let start = self.offset();
        let mut bytes = Vec::new();
        loop {
            let mut b = [0u8; 1];
            self.cur.read_exact(&mut b).map_err(|_| self.truncated())?;
            if b[0] == 0 {
                break;
            }
            bytes.push(b[0]);
        }
        String::from_utf8(bytes).map_err(|_| self.err_at(start, "image name is not UTF-8"))
    }

    fn skip(&mut self, n: u64) -> Result<(), ColmapError> {
        let remaining = self.cur.get_ref().len() as u64 - self.offset();
        if n > remaining {
            return Err(self.err_at(self.offset(), format!("record claims {n} bytes, {remaining} left")));
        }
        self.cur.set_position(self.offset() + n);
        Ok(())
    }

    fn check_count(&self, count: u64, min_record: u64) -> Result<(), ColmapError> {
        let remaining = self.cur.get_ref().len() as u64 - self.offset();
        if count.saturating_mul(min_record) > remaining {
            return Err(self.err_at(0, format!("record count {count} exceeds file size")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), ColmapError> {
        if self.offset() != self.cur.get_ref().len() as u64 {
            return Err(self.err_at(self.offset(), "trailing bytes after last record"));
        }
        Ok(())
    }
}

/// Reads `cameras.bin`.
pub fn read_cameras_binary(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<CameraId, CameraIntrinsics>, ColmapError> {
    let mut r = BinReader::open(path.as_ref())?;
    let count = r.u64()?;
    r.check_count(count, 24)?;
    let mut cameras = BTreeMap::new();
    for _ in 0..count {
        let start = r.offset();
        let camera_id = r.u32()?;
        let model_id = r.i32()?;
        let model = CameraModel::from_colmap_id(model_id).ok_or_else(|| {
            ColmapError::UnknownCameraModel {
                camera_id,
                model: format!("id {model_id}"),
            }
        })?;
        let width = r.u64()?;
        let height = r.u64()?;
        let params = (0..model.num_params())
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        let cam = CameraIntrinsics::from_params(camera_id, model, width as usize, height as usize, &params)
            .map_err(|e| r.err_at(start, e))?;
        if cameras.insert(camera_id, cam).is_some() {
            return Err(r.err_at(start, format!("duplicate camera id {camera_id}")));
        }
    }
    r.finish()?;
    Ok(cameras)
}

/// Reads `images.bin`, skipping the 2D observations of every image.
pub fn read_images_binary(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<ImageId, PosedImage>, ColmapError> {
    let mut r = BinReader::open(path.as_ref())?;
    let count = r.u64()?;
    r.check_count(count, 4 + 7 * 8 + 4 + 1 + 8)?;
    let mut images = BTreeMap::new();
    for _ in 0..count {
        let start = r.offset();
        let image_id = r.u32()?;
        let mut q = [0.0; 4];
        for slot in &mut q {
            *slot = r.f64()?;
        }
        let t = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let camera_id = r.u32()?;
        let name = r.cstring()?;
        let num_points = r.u64()?;
        r.skip(num_points.saturating_mul(POINT2D_BYTES))?;
        let img = PosedImage::from_wxyz(image_id, camera_id, q, t, name)
            .ok_or_else(|| r.err_at(start, "degenerate quaternion or non-finite translation"))?;
        if images.insert(image_id, img).is_some() {
            return Err(r.err_at(start, format!("duplicate image id {image_id}")));
        }
    }
    r.finish()?;
    Ok(images)
}

/// Writes `cameras.bin` and `images.bin` (with zero 2D observations) into
/// `dir`.
pub fn write_binary_model(model: &SceneModel, dir: impl AsRef<Path>) -> Result<(), ColmapError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut cams = Vec::new();
    cams.write_u64::<LittleEndian>(model.cameras.len() as u64)?;
    for c in model.cameras.values() {
        cams.write_u32::<LittleEndian>(c.camera_id)?;
        cams.write_i32::<LittleEndian>(c.model.colmap_id())?;
        cams.write_u64::<LittleEndian>(c.width as u64)?;
        cams.write_u64::<LittleEndian>(c.height as u64)?;
        for p in c.params() {
            cams.write_f64::<LittleEndian>(p)?;
        }
    }
    fs::write(dir.join("cameras.bin"), cams)?;

    let mut imgs = Vec::new();
    imgs.write_u64::<LittleEndian>(model.images.len() as u64)?;
    for img in model.images.values() {
        imgs.write_u32::<LittleEndian>(img.image_id)?;
        for q in img.qvec() {
            imgs.write_f64::<LittleEndian>(q)?;
        }
        for t in img.translation.iter() {
            imgs.write_f64::<LittleEndian>(*t)?;
        }
        imgs.write_u32::<LittleEndian>(img.camera_id)?;
        imgs.write_all(img.name.as_bytes())?;
        imgs.write_u8(0)?;
        imgs.write_u64::<LittleEndian>(0)?;
    }
    fs::write(dir.join("images.bin"), imgs)?;
    Ok(())
}

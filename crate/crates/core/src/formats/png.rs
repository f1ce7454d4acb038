//! PNG encodings used by the dataset writer and the evaluator.

use std::io::Cursor;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

use crate::raster::{ColorImage, DisparityMap, Grid, Mask};

#[derive(Debug, Error)]
pub enum PngError {
    #[error("PNG codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("expected a {expected} PNG, found {found:?}")]
    WrongPixelFormat {
        expected: &'static str,
        found: image::ColorType,
    },
}

/// Scale of the 16-bit KITTI-style disparity encoding.
pub const DISPARITY_PNG_SCALE: f64 = 256.0;

fn encode(bytes: &[u8], width: usize, height: usize, ty: ExtendedColorType) -> Result<Vec<u8>, PngError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(bytes, width as u32, height as u32, ty)?;
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<DynamicImage, PngError> {
    Ok(image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png).decode()?)
}

pub fn encode_rgb8(img: &ColorImage) -> Result<Vec<u8>, PngError> {
    encode(&img.to_rgb8(), img.width(), img.height(), ExtendedColorType::Rgb8)
}

pub fn encode_gray8(width: usize, height: usize, values: &[u8]) -> Result<Vec<u8>, PngError> {
    encode(values, width, height, ExtendedColorType::L8)
}

/// 8-bit mask: 255 where true, 0 elsewhere.
pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>, PngError> {
    let bytes: Vec<u8> = mask.as_slice().iter().map(|m| if *m { 255 } else { 0 }).collect();
    encode_gray8(mask.width(), mask.height(), &bytes)
}

/// Decodes an 8-bit mask; any non-zero pixel is true.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask, PngError> {
    let img = decode(bytes)?;
    let DynamicImage::ImageLuma8(g) = img else {
        return Err(PngError::WrongPixelFormat {
            expected: "8-bit grey",
            found: img.color(),
        });
    };
    let (w, h) = (g.width() as usize, g.height() as usize);
    Ok(Grid::from_vec(w, h, g.into_raw().into_iter().map(|v| v != 0).collect()))
}

/// Encodes disparity as 16-bit PNG with value `round(d·256)` and `0` for
/// invalid pixels. Valid disparities are clamped to `[1, 65535]` so they
/// never collide with the invalid marker.
pub fn encode_disparity_png16(disp: &DisparityMap) -> Result<Vec<u8>, PngError> {
    let mut bytes = Vec::with_capacity(disp.values.len() * 2);
    for (v, ok) in disp.values.as_slice().iter().zip(disp.valid.as_slice()) {
        let code: u16 = if *ok {
            (v * DISPARITY_PNG_SCALE).round().clamp(1.0, u16::MAX as f64) as u16
        } else {
            0
        };
        // The encoder expects native-endian u16 samples.
        bytes.extend_from_slice(&code.to_ne_bytes());
    }
    encode(&bytes, disp.width(), disp.height(), ExtendedColorType::L16)
}

pub fn decode_disparity_png16(bytes: &[u8]) -> Result<DisparityMap, PngError> {
    let img = decode(bytes)?;
    let DynamicImage::ImageLuma16(g) = img else {
        return Err(PngError::WrongPixelFormat {
            expected: "16-bit grey",
            found: img.color(),
        });
    };
    let (w, h) = (g.width() as usize, g.height() as usize);
    let values = g
        .into_raw()
        .into_iter()
        .map(|c| c as f64 / DISPARITY_PNG_SCALE)
        .collect();
    Ok(DisparityMap::from_values(Grid::from_vec(w, h, values)))
}

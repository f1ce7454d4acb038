//! Portable float map (PFM) images.
//!
//! Layout: `Pf\n` (grey) or `PF\n` (RGB), `<width> <height>\n`, `<scale>\n`,
//! then 32-bit float rows stored bottom-to-top. A negative scale marks a
//! little-endian body. The writer always emits grey little-endian files with
//! scale `-1`.

use std::io::{self, BufRead, Read, Write};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use thiserror::Error;

use crate::raster::{DisparityMap, Grid};

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PFM body: expected {expected} bytes, found {found}")]
    TruncatedBody { expected: usize, found: usize },
    #[error("expected a single-channel PFM, found {0} channels")]
    ChannelMismatch(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Decoded PFM image with rows top-to-bottom and channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Absolute value of the header scale.
    pub scale: f32,
    pub data: Vec<f32>,
}

fn token(r: &mut impl BufRead) -> Result<String, PfmError> {
    let mut tok = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b)? == 0 {
            if tok.is_empty() {
                return Err(PfmError::MalformedHeader("unexpected end of header".into()));
            }
            break;
        }
        if b[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            // The single whitespace byte after the scale is consumed here.
            break;
        }
        tok.push(b[0]);
        if tok.len() > 64 {
            return Err(PfmError::MalformedHeader("header token too long".into()));
        }
    }
    String::from_utf8(tok).map_err(|_| PfmError::MalformedHeader("non-ASCII header".into()))
}

pub fn read_pfm(mut r: impl BufRead) -> Result<PfmImage, PfmError> {
    let magic = token(&mut r)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(PfmError::MalformedHeader(format!("bad magic {other:?}"))),
    };
    let parse_dim = |s: String| -> Result<usize, PfmError> {
        s.parse()
            .map_err(|_| PfmError::MalformedHeader(format!("bad dimension {s:?}")))
    };
    let width = parse_dim(token(&mut r)?)?;
    let height = parse_dim(token(&mut r)?)?;
    let scale_tok = token(&mut r)?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| PfmError::MalformedHeader(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::MalformedHeader(format!("bad scale {scale_tok:?}")));
    }
    let little = scale < 0.0;
    let row_len = width * channels;
    let expected = row_len * height * 4;
    let mut body = Vec::with_capacity(expected);
    r.take(expected as u64).read_to_end(&mut body)?;
    if body.len() != expected {
        return Err(PfmError::TruncatedBody {
            expected,
            found: body.len(),
        });
    }
    let mut data = vec![0f32; row_len * height];
    for (file_row, chunk) in body.chunks_exact((row_len * 4).max(1)).enumerate().take(height) {
        let dst_row = height - 1 - file_row;
        let dst = &mut data[dst_row * row_len..(dst_row + 1) * row_len];
        if little {
            LittleEndian::read_f32_into(chunk, dst);
        } else {
            BigEndian::read_f32_into(chunk, dst);
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        scale: scale.abs(),
        data,
    })
}

/// Writes a single-channel little-endian PFM. `data` is row-major,
/// top row first.
pub fn write_pfm(mut w: impl Write, width: usize, height: usize, data: &[f32]) -> io::Result<()> {
    assert_eq!(data.len(), width * height, "PFM data length mismatch");
    let mut out = Vec::with_capacity(32 + data.len() * 4);
    write!(out, "Pf\n{width} {height}\n-1\n")?;
    let mut row_bytes = vec![0u8; width * 4];
    for y in (0..height).rev() {
        LittleEndian::write_f32_into(&data[y * width..(y + 1) * width], &mut row_bytes);
        out.extend_from_slice(&row_bytes);
    }
    w.write_all(&out)
}

pub fn encode_pfm(width: usize, height: usize, data: &[f32]) -> Vec<u8> {
    let mut out = Vec::new();
    write_pfm(&mut out, width, height, data).expect("writing to a Vec cannot fail");
    out
}

/// Encodes a disparity map as PFM; invalid pixels become `0`.
pub fn encode_disparity(disp: &DisparityMap) -> Vec<u8> {
    let data: Vec<f32> = disp
        .values
        .as_slice()
        .iter()
        .zip(disp.valid.as_slice())
        .map(|(v, ok)| if *ok { *v as f32 } else { 0.0 })
        .collect();
    encode_pfm(disp.width(), disp.height(), &data)
}

/// Decodes a grey PFM as disparity. Non-finite and non-positive values are
/// invalid (covers both the `0` and the `inf` invalid conventions).
pub fn decode_disparity(r: impl BufRead) -> Result<DisparityMap, PfmError> {
    let img = read_pfm(r)?;
    if img.channels != 1 {
        return Err(PfmError::ChannelMismatch(img.channels));
    }
    let values = Grid::from_vec(img.width, img.height, img.data.iter().map(|v| *v as f64).collect());
    Ok(DisparityMap::from_values(values))
}

//! Gaussian-splat scenes and a CPU front-to-back compositing renderer.

mod composite;
mod project;
mod render;

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use thiserror::Error;

use crate::formats::ply::{
    read_ply, write_ply, Column, ElementData, ElementDef, PlyEncoding, PlyError, PropertyDef, PropertyType,
    ScalarType,
};
use crate::geometry::Vec3;
pub use composite::{composite_pixel, composite_pixel_with, Composite, CompositeOptions};
pub use project::{project_splat, project_splat_with, Splat2D, COV2D_DILATION, DEFAULT_NEAR_CLIP};
pub use render::{alpha_filter_mask, render_splats, render_splats_with, RenderOptions, SplatRender, TILE_SIZE};

/// Degree-0 spherical-harmonic basis constant.
pub const SH_C0: f64 = 0.28209479177;

#[derive(Debug, Error)]
pub enum SplatError {
    #[error("splat PLY lacks property {0:?}")]
    MissingProperty(String),
    #[error("malformed splat PLY header: {0}")]
    MalformedHeader(String),
    #[error("splat {index}: {reason}")]
    InvalidSplat { index: usize, reason: String },
    #[error(transparent)]
    Ply(PlyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<PlyError> for SplatError {
    fn from(e: PlyError) -> Self {
        match e {
            PlyError::MalformedHeader(s) => SplatError::MalformedHeader(s),
            PlyError::Io(e) => SplatError::Io(e),
            other => SplatError::Ply(other),
        }
    }
}

/// A 3D Gaussian with activated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    pub mean: Vec3,
    /// Per-axis standard deviation in the splat's local frame.
    pub scale: Vec3,
    /// Local-to-world rotation.
    pub rotation: UnitQuaternion<f64>,
    pub opacity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplatScene {
    pub splats: Vec<Splat>,
}

impl SplatScene {
    pub fn new(splats: Vec<Splat>) -> Self {
        Self { splats }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const REQUIRED: [&str; 14] = [
    "x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0",
    "f_dc_1", "f_dc_2",
];

/// Reads splats in the reference 3DGS PLY layout, applying activations:
/// logistic opacity, exponential scale, normalized rotation (`rot_0` is `w`)
/// and DC colour `0.5 + SH_C0·f_dc` clamped to `[0, 1]`. Higher-order
/// spherical-harmonic coefficients are ignored.
pub fn read_splats(reader: impl BufRead) -> Result<SplatScene, SplatError> {
    let data = read_ply(reader, |el, prop| el == "vertex" && REQUIRED.contains(&prop))?;
    let vertex = data
        .element("vertex")
        .ok_or_else(|| SplatError::MalformedHeader("no vertex element".into()))?;
    let mut cols = Vec::with_capacity(REQUIRED.len());
    for name in REQUIRED {
        cols.push(vertex.scalar(name).ok_or_else(|| SplatError::MissingProperty(name.into()))?);
    }
    let mut splats = Vec::with_capacity(vertex.def.count);
    for i in 0..vertex.def.count {
        let r: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        if !r.iter().all(|v| v.is_finite()) {
            return Err(SplatError::InvalidSplat {
                index: i,
                reason: "non-finite parameter".into(),
            });
        }
        let q = Quaternion::new(r[7], r[8], r[9], r[10]);
        if q.norm() == 0.0 {
            return Err(SplatError::InvalidSplat {
                index: i,
                reason: "zero rotation quaternion".into(),
            });
        }
        let scale = Vec3::new(r[4].exp(), r[5].exp(), r[6].exp());
        if !scale.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(SplatError::InvalidSplat {
                index: i,
                reason: "scale out of range".into(),
            });
        }
        splats.push(Splat {
            mean: Vec3::new(r[0], r[1], r[2]),
            scale,
            rotation: UnitQuaternion::from_quaternion(q),
            opacity: sigmoid(r[3]),
            color: [11, 12, 13].map(|k| (0.5 + SH_C0 * r[k]).clamp(0.0, 1.0)),
        });
    }
    Ok(SplatScene { splats })
}

pub fn load_splats(path: impl AsRef<Path>) -> Result<SplatScene, SplatError> {
    read_splats(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes splats in the reference PLY layout by inverting the activations.
/// Opacities of exactly 0 or 1 map to infinite logits and are nudged inside
/// the open interval.
pub fn write_splats(scene: &SplatScene, w: impl Write) -> Result<(), SplatError> {
    let s = &scene.splats;
    let col = |f: &dyn Fn(&Splat) -> f64| Column::Scalar(s.iter().map(f).collect());
    let columns = vec![
        col(&|p| p.mean.x),
        col(&|p| p.mean.y),
        col(&|p| p.mean.z),
        col(&|p| {
            let o = p.opacity.clamp(1e-7, 1.0 - 1e-7);
            (o / (1.0 - o)).ln()
        }),
        col(&|p| p.scale.x.ln()),
        col(&|p| p.scale.y.ln()),
        col(&|p| p.scale.z.ln()),
        col(&|p| p.rotation.w),
        col(&|p| p.rotation.i),
        col(&|p| p.rotation.j),
        col(&|p| p.rotation.k),
        col(&|p| (p.color[0] - 0.5) / SH_C0),
        col(&|p| (p.color[1] - 0.5) / SH_C0),
        col(&|p| (p.color[2] - 0.5) / SH_C0),
    ];
    let properties = REQUIRED
        .iter()
        .map(|n| PropertyDef {
            name: n.to_string(),
            ty: PropertyType::Scalar(ScalarType::F32),
        })
        .collect();
    let el = ElementData {
        def: ElementDef {
            name: "vertex".into(),
            count: s.len(),
            properties,
        },
        columns,
    };
    write_ply(w, PlyEncoding::BinaryLittleEndian, &[], &[el])?;
    Ok(())
}

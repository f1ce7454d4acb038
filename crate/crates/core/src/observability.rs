//! Per-vertex observability counts and observability-based camera ranking.
//!
//! A camera observes a vertex when the vertex projects into its image with
//! positive depth, the segment from the camera centre to the vertex is not
//! blocked by the mesh, and the view direction is within the grazing limit
//! of the vertex normal.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colmap::{project, CameraIntrinsics, ColmapError, ImageId, PosedImage, SceneModel};
use crate::geometry::Vec3;
use crate::mesh::{AcceleratedMesh, TriangleMesh};
use crate::raster::{Grid, Mask, Resolution};
use crate::raycast::raycast_hits;

/// Grazing limit in degrees between view ray and vertex normal.
pub const DEFAULT_GRAZING_LIMIT_DEG: f64 = 80.0;

/// Number of cameras kept by [`select_top_k`] by default.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum ObservabilityError {
    #[error("scene model has no images")]
    EmptyModel,
    #[error("observability field has {found} counts for {expected} vertices")]
    SizeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ColmapError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityField {
    /// Observing cameras per vertex.
    pub counts: Vec<u32>,
    /// Number of cameras considered.
    pub max_possible: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraScore {
    pub image_id: ImageId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityOptions {
    /// `None` disables the grazing-angle test.
    pub grazing_limit_deg: Option<f64>,
    /// Occlusion epsilon; `None` uses the mesh default.
    pub epsilon: Option<f64>,
}

impl Default for ObservabilityOptions {
    fn default() -> Self {
        Self {
            grazing_limit_deg: Some(DEFAULT_GRAZING_LIMIT_DEG),
            epsilon: None,
        }
    }
}

struct View<'a> {
    intr: &'a CameraIntrinsics,
    pose: &'a PosedImage,
    center: Vec3,
}

fn views(model: &SceneModel) -> Result<Vec<View<'_>>, ObservabilityError> {
    if model.images.is_empty() {
        return Err(ObservabilityError::EmptyModel);
    }
    model
        .images
        .values()
        .map(|pose| {
            let intr = model.cameras.get(&pose.camera_id).ok_or_else(|| {
                ColmapError::InvalidModel(format!("image {} references missing camera {}", pose.image_id, pose.camera_id))
            })?;
            Ok(View {
                intr,
                pose,
                center: pose.center(),
            })
        })
        .collect()
}

/// Angle in degrees between `a` and `b`.
fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn vertex_observability(
    accel: &AcceleratedMesh,
    model: &SceneModel,
    grazing_limit_deg: f64,
) -> Result<ObservabilityField, ObservabilityError> {
    vertex_observability_with(
        accel,
        model,
        &ObservabilityOptions {
            grazing_limit_deg: Some(grazing_limit_deg),
            epsilon: None,
        },
    )
}

/// Counts, for each vertex, the cameras that observe it.
///
/// Vertex normals are area-weighted; a vertex with no incident area skips
/// the grazing test.
pub fn vertex_observability_with(
    accel: &AcceleratedMesh,
    model: &SceneModel,
    opts: &ObservabilityOptions,
) -> Result<ObservabilityField, ObservabilityError> {
    if let Some(g) = opts.grazing_limit_deg {
        assert!(g > 0.0 && g <= 90.0, "grazing limit {g} outside (0, 90]");
    }
    let views = views(model)?;
    let eps = opts.epsilon.unwrap_or_else(|| accel.default_epsilon());
    let mesh = accel.mesh();
    let normals = mesh.vertex_normals();
    let counts = mesh
        .vertices()
        .par_iter()
        .zip(normals.par_iter())
        .map(|(v, n)| {
            views
                .iter()
                .filter(|view| {
                    if project(view.intr, view.pose, v).is_none() {
                        return false;
                    }
                    if let Some(limit) = opts.grazing_limit_deg {
                        if n.norm_squared() > 0.0 && angle_deg(&(view.center - v), n) > limit {
                            return false;
                        }
                    }
                    !accel.is_occluded(&view.center, v, eps)
                })
                .count() as u32
        })
        .collect();
    Ok(ObservabilityField {
        counts,
        max_possible: views.len() as u32,
    })
}

/// Perceptually ordered colormap (viridis) sampled at nine stops.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

/// Maps `t ∈ [0, 1]` to an RGB triple in `0..=255`.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    [0, 1, 2].map(|c| (VIRIDIS[i][c] + f * (VIRIDIS[i + 1][c] - VIRIDIS[i][c])).round() as u8)
}

/// Copies the mesh with `red`/`green`/`blue` vertex attributes colouring
/// `count / max_possible`.
pub fn export_heatmap(mesh: &TriangleMesh, field: &ObservabilityField) -> Result<TriangleMesh, ObservabilityError> {
    if field.counts.len() != mesh.vertex_count() {
        return Err(ObservabilityError::SizeMismatch {
            expected: mesh.vertex_count(),
            found: field.counts.len(),
        });
    }
    let denom = field.max_possible.max(1) as f64;
    let colors: Vec<[u8; 3]> = field.counts.iter().map(|c| colormap(*c as f64 / denom)).collect();
    let mut out = mesh.clone();
    for (k, name) in ["red", "green", "blue"].iter().enumerate() {
        out.set_attribute(*name, colors.iter().map(|c| c[k] as f64).collect())
            .expect("one colour per vertex");
    }
    Ok(out)
}

/// Per-pixel observability; values are meaningful where `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityMap {
    pub values: Grid<f64>,
    pub valid: Mask,
}

impl ObservabilityMap {
    /// Sum of valid values in row-major order.
    pub fn total(&self) -> f64 {
        self.values
            .as_slice()
            .iter()
            .zip(self.valid.as_slice())
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
            .sum()
    }
}

/// Ray casts every pixel and interpolates the hit triangle's vertex counts
/// barycentrically.
pub fn render_observability(
    accel: &AcceleratedMesh,
    field: &ObservabilityField,
    intr: &CameraIntrinsics,
    pose: &PosedImage,
    res: Resolution,
) -> Result<ObservabilityMap, ObservabilityError> {
    let mesh = accel.mesh();
    if field.counts.len() != mesh.vertex_count() {
        return Err(ObservabilityError::SizeMismatch {
            expected: mesh.vertex_count(),
            found: field.counts.len(),
        });
    }
    let hits = raycast_hits(accel, intr, pose, res);
    let values = hits.map(|h| {
        h.map_or(0.0, |(hit, _)| {
            let f = mesh.faces()[hit.face_index];
            (0..3).map(|k| hit.barycentric[k] * field.counts[f[k] as usize] as f64).sum()
        })
    });
    Ok(ObservabilityMap {
        values,
        valid: hits.map(|h| h.is_some()),
    })
}

/// Descending by score, ties by ascending image id.
fn rank(scores: &mut [CameraScore]) {
    scores.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.image_id.cmp(&b.image_id),
        o => o,
    });
}

/// Scores each image by the sum of its rendered observability map.
///
/// `resolution` overrides every camera's native size when given. Pixels
/// without a hit contribute nothing.
pub fn score_cameras(
    accel: &AcceleratedMesh,
    field: &ObservabilityField,
    model: &SceneModel,
    resolution: Option<Resolution>,
) -> Result<Vec<CameraScore>, ObservabilityError> {
    let views = views(model)?;
    let mut scores = Vec::with_capacity(views.len());
    for view in &views {
        let res = resolution.unwrap_or_else(|| view.intr.resolution());
        let map = render_observability(accel, field, view.intr, view.pose, res)?;
        scores.push(CameraScore {
            image_id: view.pose.image_id,
            score: map.total(),
        });
    }
    rank(&mut scores);
    Ok(scores)
}

/// The first `min(k, n)` image ids of a ranked list.
pub fn select_top_k(scores: &[CameraScore], k: usize) -> Vec<ImageId> {
    assert!(k >= 1, "k must be at least 1");
    scores.iter().take(k).map(|s| s.image_id).collect()
}

/// Ranks arbitrary scores with the same ordering as [`score_cameras`].
pub fn ranked(mut scores: Vec<CameraScore>) -> Vec<CameraScore> {
    rank(&mut scores);
    scores
}

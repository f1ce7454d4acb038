use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};

use super::Splat;
use crate::colmap::{CameraIntrinsics, PosedImage};

/// Splats at or nearer than this camera-frame depth are dropped.
pub const DEFAULT_NEAR_CLIP: f64 = 0.2;

/// Added to both diagonal entries of every projected covariance (px²).
pub const COV2D_DILATION: f64 = 0.3;

/// A splat projected onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    /// Image-plane position (pixel centres at `i + 0.5`).
    pub mean2d: Vector2<f64>,
    /// Dilated screen-space covariance.
    pub cov2d: Matrix2<f64>,
    /// Inverse of `cov2d`.
    pub conic: Matrix2<f64>,
    /// Camera-frame z of the mean.
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Three standard deviations along image x and y.
    pub extent: Vector2<f64>,
}

impl Splat2D {
    /// Builds a projected splat from its screen-space parameters. Returns
    /// `None` when `cov2d` is not positive definite.
    pub fn new(mean2d: Vector2<f64>, cov2d: Matrix2<f64>, depth: f64, opacity: f64, color: [f64; 3]) -> Option<Self> {
        let det = cov2d.determinant();
        if !(det > 0.0 && cov2d[(0, 0)] > 0.0) || !det.is_finite() {
            return None;
        }
        let conic = Matrix2::new(cov2d[(1, 1)], -cov2d[(0, 1)], -cov2d[(1, 0)], cov2d[(0, 0)]) / det;
        let extent = Vector2::new(3.0 * cov2d[(0, 0)].sqrt(), 3.0 * cov2d[(1, 1)].sqrt());
        Some(Self {
            mean2d,
            cov2d,
            conic,
            depth,
            opacity,
            color,
            extent,
        })
    }

    /// Gaussian weight `opacity·exp(-½ dᵀ·cov2d⁻¹·d)` at image point `p`.
    #[inline]
    pub fn alpha_at(&self, p: (f64, f64)) -> f64 {
        let dx = p.0 - self.mean2d.x;
        let dy = p.1 - self.mean2d.y;
        let power = -0.5 * (self.conic[(0, 0)] * dx * dx + 2.0 * self.conic[(0, 1)] * dx * dy + self.conic[(1, 1)] * dy * dy);
        self.opacity * power.exp()
    }

    /// Whether `p` lies inside the per-axis 3σ footprint.
    #[inline]
    pub fn covers(&self, p: (f64, f64)) -> bool {
        (p.0 - self.mean2d.x).abs() <= self.extent.x && (p.1 - self.mean2d.y).abs() <= self.extent.y
    }
}

pub fn project_splat(splat: &Splat, intr: &CameraIntrinsics, pose: &PosedImage) -> Option<Splat2D> {
    project_splat_with(splat, intr, pose, DEFAULT_NEAR_CLIP)
}

/// Projects with the local affine approximation: `cov2d = J·W·Σ·Wᵀ·Jᵀ`
/// plus [`COV2D_DILATION`] on the diagonal, where `J` is the Jacobian of the
/// pinhole projection at the mean.
pub fn project_splat_with(splat: &Splat, intr: &CameraIntrinsics, pose: &PosedImage, near_clip: f64) -> Option<Splat2D> {
    let pc = pose.world_to_camera(&splat.mean);
    if !(pc.z > near_clip) {
        return None;
    }
    let r = splat.rotation.to_rotation_matrix().into_inner();
    let s2 = Matrix3::from_diagonal(&splat.scale.component_mul(&splat.scale));
    let sigma = r * s2 * r.transpose();
    let w = pose.rotation_matrix();
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let j = Matrix2x3::new(
        intr.fx / z,
        0.0,
        -intr.fx * x / (z * z),
        0.0,
        intr.fy / z,
        -intr.fy * y / (z * z),
    );
    let t = j * w;
    let mut cov = t * sigma * t.transpose();
    // Exact symmetry keeps the conic symmetric too.
    let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    cov[(0, 1)] = off;
    cov[(1, 0)] = off;
    cov[(0, 0)] += COV2D_DILATION;
    cov[(1, 1)] += COV2D_DILATION;
    let mean2d = Vector2::new(intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy);
    Splat2D::new(mean2d, cov, z, splat.opacity, splat.color)
}

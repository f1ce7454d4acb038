use super::{CameraIntrinsics, ColmapError, PosedImage};
use crate::geometry::{Ray, Vec3};

/// A world point projected into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Image-plane x coordinate (pixel centres at `i + 0.5`).
    pub u: f64,
    pub v: f64,
    /// Camera-frame z coordinate.
    pub depth: f64,
}

/// Ray through image-plane coordinates `(u, v)`, without any half-pixel
/// offset. `project` is its exact inverse.
pub fn ray_through(
    intr: &CameraIntrinsics,
    pose: &PosedImage,
    u: f64,
    v: f64,
) -> Result<Ray, ColmapError> {
    if !(u.is_finite() && v.is_finite()) {
        return Err(ColmapError::NonFiniteInput);
    }
    let dir_cam = Vec3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    Ray::new(pose.center(), pose.camera_to_world_dir(&dir_cam)).ok_or(ColmapError::NonFiniteInput)
}

/// Ray from the camera centre through the centre of pixel `(x, y)`, i.e.
/// through image-plane point `(x + 0.5, y + 0.5)`. Fractional pixel indices
/// are accepted. Distortion is ignored.
pub fn camera_ray(
    intr: &CameraIntrinsics,
    pose: &PosedImage,
    pixel: (f64, f64),
) -> Result<Ray, ColmapError> {
    ray_through(intr, pose, pixel.0 + 0.5, pixel.1 + 0.5)
}

/// Pinhole projection of a world point.
///
/// Returns `None` when the point is not strictly in front of the camera or
/// lands outside `[0, width) × [0, height)`.
pub fn project(intr: &CameraIntrinsics, pose: &PosedImage, point: &Vec3) -> Option<Projection> {
    let pc = pose.world_to_camera(point);
    if !(pc.z > 0.0) {
        return None;
    }
    let u = intr.fx * pc.x / pc.z + intr.cx;
    let v = intr.fy * pc.y / pc.z + intr.cy;
    let inside = u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64;
    inside.then_some(Projection { u, v, depth: pc.z })
}

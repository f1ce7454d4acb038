//! Per-pixel ray casting against an accelerated mesh.

use rayon::prelude::*;

use crate::colmap::{camera_ray, CameraIntrinsics, PosedImage};
use crate::mesh::{AcceleratedMesh, Hit};
use crate::raster::{DepthMap, Grid, Resolution};

fn for_resolution(intr: &CameraIntrinsics, res: Resolution) -> CameraIntrinsics {
    if intr.resolution() == res {
        intr.clone()
    } else {
        intr.scaled_to(res)
    }
}

/// Nearest hit through every pixel centre, with the hit's camera-frame z.
/// Intrinsics are rescaled when `res` differs from the native size.
pub fn raycast_hits(
    accel: &AcceleratedMesh,
    intr: &CameraIntrinsics,
    pose: &PosedImage,
    res: Resolution,
) -> Grid<Option<(Hit, f64)>> {
    let intr = for_resolution(intr, res);
    let w = res.width;
    let mut data = vec![None; res.pixel_count()];
    data.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let ray = camera_ray(&intr, pose, (x as f64, y as f64)).expect("pixel coordinates are finite");
            *out = accel.intersect(&ray, f64::INFINITY).map(|h| {
                let z = h.t * (pose.rotation * ray.direction).z;
                (h, z)
            });
        }
    });
    Grid::from_vec(res.width, res.height, data)
}

/// Z-depth of the nearest surface per pixel; invalid where the ray misses.
pub fn raycast_depth(accel: &AcceleratedMesh, intr: &CameraIntrinsics, pose: &PosedImage, res: Resolution) -> DepthMap {
    let hits = raycast_hits(accel, intr, pose, res);
    DepthMap::from_values(hits.map(|h| h.map_or(0.0, |(_, z)| z)))
}

/// Headlight shading `|n·d|` in `[0, 1]`, `0` where the ray misses.
pub fn shade_hits(hits: &Grid<Option<(Hit, f64)>>, pose: &PosedImage) -> Grid<f64> {
    let view = pose.rotation.inverse() * nalgebra::Vector3::z();
    hits.map(|h| h.map_or(0.0, |(hit, _)| 0.15 + 0.85 * hit.geometric_normal.dot(&view).abs()))
}

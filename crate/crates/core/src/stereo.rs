//! Rectified virtual stereo rigs and depth/disparity conversion.
//!
//! With focal length `f` in pixels and baseline `b` in world units, a point
//! at camera-frame depth `z` has disparity `d = f·b / z`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::colmap::{CameraIntrinsics, PosedImage};
use crate::raster::{DepthMap, DisparityMap, Grid, Mask};

/// Left-right consistency tolerance used for non-occlusion masks (px).
pub const DEFAULT_OCCLUSION_TOLERANCE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum StereoError {
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("map size mismatch: {left:?} vs {right:?}")]
    SizeMismatch { left: (usize, usize), right: (usize, usize) },
}

/// Right camera of a rectified rig: the centre moves by `baseline` along the
/// left camera's `+x` axis, the rotation is shared.
pub fn make_right_camera(left: &PosedImage, baseline: f64) -> Result<PosedImage, StereoError> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(StereoError::NonPositiveBaseline(baseline));
    }
    let mut right = left.clone();
    right.translation.x -= baseline;
    Ok(right)
}

/// A rectified stereo pair sharing one set of intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoRig {
    pub left: PosedImage,
    pub right: PosedImage,
    pub baseline: f64,
    pub intrinsics: CameraIntrinsics,
}

impl StereoRig {
    pub fn new(intrinsics: CameraIntrinsics, left: PosedImage, baseline: f64) -> Result<Self, StereoError> {
        let right = make_right_camera(&left, baseline)?;
        Ok(Self {
            left,
            right,
            baseline,
            intrinsics,
        })
    }

    /// Horizontal focal length, the `f` used for disparity.
    pub fn focal(&self) -> f64 {
        self.intrinsics.fx
    }
}

fn check_fb(f: f64, b: f64) {
    assert!(f > 0.0 && f.is_finite(), "focal length must be positive, got {f}");
    assert!(b > 0.0 && b.is_finite(), "baseline must be positive, got {b}");
}

pub fn depth_to_disparity(depth: &DepthMap, f: f64, b: f64) -> DisparityMap {
    check_fb(f, b);
    let fb = f * b;
    let values = Grid::from_fn(depth.width(), depth.height(), |x, y| {
        depth.at(x, y).map_or(0.0, |z| fb / z)
    });
    DisparityMap::from_parts(values, depth.valid.clone())
}

pub fn disparity_to_depth(disp: &DisparityMap, f: f64, b: f64) -> DepthMap {
    check_fb(f, b);
    let fb = f * b;
    let values = Grid::from_fn(disp.width(), disp.height(), |x, y| disp.at(x, y).map_or(0.0, |d| fb / d));
    DepthMap::from_parts(values, disp.valid.clone())
}

/// Left-right consistency mask, `true` for non-occluded pixels.
///
/// Left pixel `x` with disparity `d` matches the right pixel containing
/// image coordinate `x + 0.5 − d`. The pixel is non-occluded when that pixel
/// exists, is valid, and its disparity is within `tolerance_px` of `d`.
pub fn occlusion_mask(left: &DisparityMap, right: &DisparityMap, tolerance_px: f64) -> Result<Mask, StereoError> {
    assert!(tolerance_px > 0.0, "tolerance must be positive, got {tolerance_px}");
    if left.width() != right.width() || left.height() != right.height() {
        return Err(StereoError::SizeMismatch {
            left: (left.width(), left.height()),
            right: (right.width(), right.height()),
        });
    }
    let w = left.width() as f64;
    Ok(Grid::from_fn(left.width(), left.height(), |x, y| {
        let Some(d) = left.at(x, y) else {
            return false;
        };
        let xr = (x as f64 + 0.5 - d).floor();
        if !(xr >= 0.0 && xr < w) {
            return false;
        }
        right.at(xr as usize, y).is_some_and(|dr| (d - dr).abs() <= tolerance_px)
    }))
}

/// Counts valid disparities per bin `[k·w, (k+1)·w)`; only non-empty bins are
/// listed, in ascending order.
pub fn disparity_histogram(disp: &DisparityMap, bin_width_px: f64) -> Vec<(f64, usize)> {
    assert!(bin_width_px > 0.0, "bin width must be positive, got {bin_width_px}");
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for d in disp.valid_values() {
        *bins.entry((d / bin_width_px).floor() as i64).or_default() += 1;
    }
    bins.into_iter().map(|(k, n)| (k as f64 * bin_width_px, n)).collect()
}

/// Median of the valid depths (mean of the two middle values for even
/// counts), `None` without valid pixels.
pub fn median_depth(depth: &DepthMap) -> Option<f64> {
    let mut v: Vec<f64> = depth.valid_values().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Baseline giving median disparity `target_disparity_px`:
/// `b = d·z_median / f`.
pub fn suggest_baseline(depth: &DepthMap, f: f64, target_disparity_px: f64) -> Option<f64> {
    assert!(f > 0.0 && target_disparity_px > 0.0);
    median_depth(depth).map(|z| target_disparity_px * z / f)
}

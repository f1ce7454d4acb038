use rayon::prelude::*;

use super::{composite_pixel_with, project_splat_with, CompositeOptions, Splat2D, SplatScene, DEFAULT_NEAR_CLIP};
use crate::colmap::{CameraIntrinsics, PosedImage};
use crate::raster::{AlphaMap, ColorImage, DepthMap, Grid, Mask, Resolution};

/// Side length of the square screen tiles used for splat binning.
pub const TILE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub composite: CompositeOptions,
    /// Depth is valid where accumulated alpha exceeds this.
    pub validity_threshold: f64,
    pub near_clip: f64,
    /// Composited under the splats with the remaining transmittance.
    pub background: [f64; 3],
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            composite: CompositeOptions::default(),
            validity_threshold: 0.5,
            near_clip: DEFAULT_NEAR_CLIP,
            background: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplatRender {
    pub image: ColorImage,
    /// Alpha-normalized depth, valid where alpha exceeds the threshold.
    pub depth: DepthMap,
    pub alpha: AlphaMap,
    /// Unnormalized `Σ zᵢ·αᵢ·Tᵢ`.
    pub raw_depth: Grid<f64>,
}

pub fn render_splats(scene: &SplatScene, intr: &CameraIntrinsics, pose: &PosedImage, res: Resolution) -> SplatRender {
    render_splats_with(scene, intr, pose, res, &RenderOptions::default())
}

/// Renders colour, depth and alpha.
///
/// Splats are projected once, sorted globally by `(depth, index)` and binned
/// into tiles by their 3σ footprint. Each pixel composites, in that order,
/// the splats whose footprint covers its centre.
pub fn render_splats_with(
    scene: &SplatScene,
    intr: &CameraIntrinsics,
    pose: &PosedImage,
    res: Resolution,
    opts: &RenderOptions,
) -> SplatRender {
    let intr = if intr.resolution() == res {
        intr.clone()
    } else {
        intr.scaled_to(res)
    };
    let (w, h) = (res.width, res.height);
    let mut projected: Vec<(usize, Splat2D)> = scene
        .splats
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| project_splat_with(s, &intr, pose, opts.near_clip).map(|p| (i, p)))
        .collect();
    projected.sort_by(|a, b| a.1.depth.total_cmp(&b.1.depth).then(a.0.cmp(&b.0)));
    let sorted: Vec<Splat2D> = projected.into_iter().map(|(_, p)| p).collect();

    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in sorted.iter().enumerate() {
        // Conservative pixel range; `covers` makes the exact decision.
        let x0 = (s.mean2d.x - s.extent.x - 0.5).floor().max(0.0);
        let x1 = (s.mean2d.x + s.extent.x - 0.5).ceil().min(w as f64 - 1.0);
        let y0 = (s.mean2d.y - s.extent.y - 0.5).floor().max(0.0);
        let y1 = (s.mean2d.y + s.extent.y - 0.5).ceil().min(h as f64 - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            continue;
        }
        let (tx0, tx1) = (x0 as usize / TILE_SIZE, x1 as usize / TILE_SIZE);
        let (ty0, ty1) = (y0 as usize / TILE_SIZE, y1 as usize / TILE_SIZE);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[ty * tiles_x + tx].push(k as u32);
            }
        }
    }

    let tiles: Vec<Vec<(usize, super::Composite)>> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let mut out = Vec::with_capacity(TILE_SIZE * TILE_SIZE);
            for y in ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(h) {
                for x in tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(w) {
                    let p = (x as f64 + 0.5, y as f64 + 0.5);
                    let list = bin.iter().map(|&k| &sorted[k as usize]).filter(|s| s.covers(p));
                    out.push((y * w + x, composite_pixel_with(list, p, &opts.composite)));
                }
            }
            out
        })
        .collect();

    let mut color = vec![[0.0; 3]; w * h];
    let mut alpha = vec![0.0; w * h];
    let mut raw = vec![0.0; w * h];
    let mut depth = vec![0.0; w * h];
    for (i, c) in tiles.into_iter().flatten() {
        color[i] = [0, 1, 2].map(|k| c.color[k] + c.transmittance * opts.background[k]);
        alpha[i] = c.alpha.clamp(0.0, 1.0);
        raw[i] = c.depth;
        depth[i] = c.normalized_depth().unwrap_or(0.0);
    }
    let valid = Grid::from_vec(w, h, alpha.iter().map(|a| *a > opts.validity_threshold).collect());
    SplatRender {
        image: ColorImage {
            pixels: Grid::from_vec(w, h, color),
        },
        depth: DepthMap::from_parts(Grid::from_vec(w, h, depth), valid),
        alpha: AlphaMap {
            values: Grid::from_vec(w, h, alpha),
        },
        raw_depth: Grid::from_vec(w, h, raw),
    }
}

/// Marks pixels whose accumulated alpha is at least `threshold`.
pub fn alpha_filter_mask(alpha: &AlphaMap, threshold: f64) -> Mask {
    assert!((0.0..=1.0).contains(&threshold), "alpha threshold {threshold} outside [0, 1]");
    alpha.values.map(|a| *a >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::procedural::splat_plane;
    use crate::splat::Splat;
    use nalgebra::UnitQuaternion;

    fn camera() -> (CameraIntrinsics, PosedImage) {
        (
            CameraIntrinsics::pinhole(1, 48, 40, 40.0, 40.0, 24.0, 20.0),
            PosedImage::from_wxyz(1, 1, [1.0, 0.0, 0.0, 0.0], Vec3::zeros(), "a").unwrap(),
        )
    }

    #[test]
    fn empty_pixels_have_zero_alpha_and_invalid_depth() {
        let (intr, pose) = camera();
        let scene = SplatScene::new(vec![Splat {
            mean: Vec3::new(-0.5, 0.0, 2.0),
            scale: Vec3::repeat(0.02),
            rotation: UnitQuaternion::identity(),
            opacity: 0.9,
            color: [1.0; 3],
        }]);
        let r = render_splats(&scene, &intr, &pose, intr.resolution());
        assert_eq!(*r.alpha.values.get(47, 39), 0.0);
        assert!(!*r.depth.valid.get(47, 39));
        assert!(r.alpha.values.get(14, 20) > &0.5);
    }

    #[test]
    fn opaque_wall_has_flat_depth() {
        let (intr, pose) = camera();
        let splats = splat_plane(Vec3::new(0.0, 0.0, 5.0), Vec3::x(), Vec3::y(), 5.0, 5.0, 0.1, 0.95, [0.3; 3]);
        let r = render_splats(&SplatScene::new(splats), &intr, &pose, intr.resolution());
        assert_eq!(r.depth.valid_count(), 48 * 40);
        for z in r.depth.valid_values() {
            assert!((z - 5.0).abs() < 1e-3);
        }
    }

    #[test]
    fn tile_binning_matches_unbinned_compositing() {
        let (intr, pose) = camera();
        let mut splats = splat_plane(Vec3::new(0.0, 0.0, 3.0), Vec3::x(), Vec3::y(), 0.8, 0.6, 0.2, 0.6, [1.0, 0.0, 0.0]);
        splats.extend(splat_plane(Vec3::new(0.3, 0.1, 4.0), Vec3::x(), Vec3::y(), 1.2, 1.0, 0.25, 0.7, [0.0, 1.0, 0.0]));
        let scene = SplatScene::new(splats);
        let r = render_splats(&scene, &intr, &pose, intr.resolution());
        let mut all: Vec<(usize, Splat2D)> = scene
            .splats
            .iter()
            .enumerate()
            .filter_map(|(i, s)| super::super::project_splat(s, &intr, &pose).map(|p| (i, p)))
            .collect();
        all.sort_by(|a, b| a.1.depth.total_cmp(&b.1.depth).then(a.0.cmp(&b.0)));
        for y in 0..40 {
            for x in 0..48 {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let c = composite_pixel_with(all.iter().map(|(_, s)| s).filter(|s| s.covers(p)), p, &CompositeOptions::default());
                assert_eq!(*r.alpha.values.get(x, y), c.alpha);
                assert_eq!(*r.raw_depth.get(x, y), c.depth);
            }
        }
    }

    #[test]
    fn alpha_mask_is_elementwise() {
        let a = AlphaMap {
            values: Grid::from_vec(3, 1, vec![0.2, 0.6, 0.95]),
        };
        assert_eq!(alpha_filter_mask(&a, 0.5).as_slice(), &[false, true, true]);
        assert!(alpha_filter_mask(&a, 0.0).as_slice().iter().all(|v| *v));
        let sat = AlphaMap {
            values: Grid::from_vec(2, 1, vec![1.0, 0.999]),
        };
        assert_eq!(alpha_filter_mask(&sat, 1.0).as_slice(), &[true, false]);
    }
}

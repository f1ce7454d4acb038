use super::Splat2D;

/// Thresholds applied while compositing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeOptions {
    /// Contributions with `α` below this are skipped.
    pub alpha_min: f64,
    /// `α` is clamped to at most this value.
    pub alpha_max: f64,
    /// Traversal stops once transmittance drops below this.
    pub transmittance_min: f64,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        Self {
            alpha_min: 1.0 / 255.0,
            alpha_max: 0.99,
            transmittance_min: 1e-4,
        }
    }
}

impl CompositeOptions {
    /// Plain front-to-back compositing with no skipping, clamping or early
    /// termination.
    pub fn exact() -> Self {
        Self {
            alpha_min: 0.0,
            alpha_max: 1.0,
            transmittance_min: 0.0,
        }
    }
}

/// Accumulated result for one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composite {
    /// `Σ cᵢ·αᵢ·Tᵢ`.
    pub color: [f64; 3],
    /// `Σ zᵢ·αᵢ·Tᵢ`, not normalized.
    pub depth: f64,
    /// `Σ αᵢ·Tᵢ`.
    pub alpha: f64,
    /// Transmittance left after the last contribution.
    pub transmittance: f64,
}

impl Composite {
    /// Depth divided by accumulated alpha, `None` when nothing contributed.
    pub fn normalized_depth(&self) -> Option<f64> {
        (self.alpha > 0.0).then(|| self.depth / self.alpha)
    }
}

/// Composites splats sorted front to back at image point `pixel` with the
/// default thresholds.
pub fn composite_pixel(splats: &[Splat2D], pixel: (f64, f64)) -> Composite {
    composite_pixel_with(splats.iter(), pixel, &CompositeOptions::default())
}

/// Front-to-back compositing: `C = Σ cᵢ·αᵢ·Tᵢ` with `Tᵢ = Π_{j<i}(1 − αⱼ)`.
///
/// Input must be sorted by ascending depth (checked in debug builds). A
/// contribution is added before the transmittance cutoff is checked.
pub fn composite_pixel_with<'a>(
    splats: impl IntoIterator<Item = &'a Splat2D>,
    pixel: (f64, f64),
    opts: &CompositeOptions,
) -> Composite {
    let mut out = Composite {
        color: [0.0; 3],
        depth: 0.0,
        alpha: 0.0,
        transmittance: 1.0,
    };
    let mut last_depth = f64::NEG_INFINITY;
    for s in splats {
        debug_assert!(s.depth >= last_depth, "splats must be sorted front to back");
        last_depth = s.depth;
        let a = s.alpha_at(pixel);
        if a < opts.alpha_min {
            continue;
        }
        let a = a.min(opts.alpha_max);
        let w = a * out.transmittance;
        for c in 0..3 {
            out.color[c] += s.color[c] * w;
        }
        out.depth += s.depth * w;
        out.alpha += w;
        out.transmittance *= 1.0 - a;
        if out.transmittance < opts.transmittance_min {
            break;
        }
    }
    out
}

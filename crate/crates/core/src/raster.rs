//! Dense per-pixel rasters used throughout the pipeline.
//!
//! All rasters are stored row-major with the top image row first. Pixel
//! `(x, y)` covers the image-plane square `[x, x+1) × [y, y+1)`, so its
//! centre sits at `(x + 0.5, y + 0.5)`.

use serde::{Deserialize, Serialize};

/// Output resolution of a render in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// A `width × height` row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps row-major `data`. Panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            width * height,
            "grid data length does not match {width}x{height}"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Boolean per-pixel mask.
pub type Mask = Grid<bool>;

/// Per-pixel camera-frame z depth in world units.
///
/// Invalid pixels carry `0.0`; every valid pixel is finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub values: Grid<f64>,
    pub valid: Mask,
}

/// Per-pixel left-view disparity in pixels.
///
/// Invalid pixels carry `0.0`; every valid pixel is finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub values: Grid<f64>,
    pub valid: Mask,
}

macro_rules! masked_map_impl {
    ($ty:ident) => {
        impl $ty {
            /// Builds a map from raw values, marking every finite positive
            /// value valid and zeroing the rest.
            pub fn from_values(values: Grid<f64>) -> Self {
                let valid = values.map(|v| v.is_finite() && *v > 0.0);
                Self::from_parts(values, valid)
            }

            /// Combines values and an explicit mask. Pixels that are masked
            /// valid but hold a non-finite or non-positive value are
            /// invalidated; invalid pixels are zeroed.
            pub fn from_parts(values: Grid<f64>, valid: Mask) -> Self {
                assert!(values.same_shape(&valid), "value/mask shape mismatch");
                let mut values = values;
                let mut valid = valid;
                for (v, ok) in values.as_mut_slice().iter_mut().zip(valid.as_mut_slice()) {
                    if !(*ok && v.is_finite() && *v > 0.0) {
                        *ok = false;
                        *v = 0.0;
                    }
                }
                Self { values, valid }
            }

            pub fn invalid(width: usize, height: usize) -> Self {
                Self {
                    values: Grid::filled(width, height, 0.0),
                    valid: Grid::filled(width, height, false),
                }
            }

            pub fn width(&self) -> usize {
                self.values.width()
            }

            pub fn height(&self) -> usize {
                self.values.height()
            }

            /// Value at `(x, y)` when valid.
            pub fn at(&self, x: usize, y: usize) -> Option<f64> {
                if *self.valid.get(x, y) {
                    Some(*self.values.get(x, y))
                } else {
                    None
                }
            }

            pub fn valid_count(&self) -> usize {
                self.valid.as_slice().iter().filter(|v| **v).count()
            }

            pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
                self.values
                    .as_slice()
                    .iter()
                    .zip(self.valid.as_slice())
                    .filter_map(|(v, ok)| ok.then_some(*v))
            }
        }
    };
}

masked_map_impl!(DepthMap);
masked_map_impl!(DisparityMap);

/// Accumulated opacity per pixel, each value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap {
    pub values: Grid<f64>,
}

/// Linear RGB colour image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub pixels: Grid<[f64; 3]>,
}

impl ColorImage {
    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 3);
        for px in self.pixels.as_slice() {
            for c in px {
                out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

//! Möller–Trumbore ray/triangle intersection.

use crate::geometry::Vec3;

/// Inclusive barycentric slack on triangle edges, so rays through shared
/// edges hit at least one of the adjacent faces.
pub const EDGE_TOLERANCE: f64 = 1e-9;

/// Relative determinant floor below which a ray counts as parallel to the
/// triangle plane (sine of the incidence angle).
const PARALLEL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    /// Weight of `v1`.
    pub u: f64,
    /// Weight of `v2`.
    pub v: f64,
}

impl TriangleHit {
    pub fn barycentric(&self) -> [f64; 3] {
        [1.0 - self.u - self.v, self.u, self.v]
    }
}

/// Intersects the line `origin + t·dir` with triangle `(v0, v0+e1, v0+e2)`
/// where `n2 = |e1 × e2|²`.
///
/// Returns the hit for any `t`, including negative values; callers apply
/// their own range. `dir` is expected to be unit length.
#[inline]
pub(crate) fn intersect_edges(
    origin: &Vec3,
    dir: &Vec3,
    v0: &Vec3,
    e1: &Vec3,
    e2: &Vec3,
    n2: f64,
) -> Option<TriangleHit> {
    let p = dir.cross(e2);
    let det = e1.dot(&p);
    // det = dir · (e1 × e2); `n2` is |e1 × e2|², compared without a sqrt.
    if det * det <= PARALLEL_EPSILON * PARALLEL_EPSILON * n2 || n2 == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(&p) * inv;
    if !(-EDGE_TOLERANCE..=1.0 + EDGE_TOLERANCE).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE_TOLERANCE || u + v > 1.0 + EDGE_TOLERANCE {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if !t.is_finite() {
        return None;
    }
    Some(TriangleHit { t, u, v })
}

/// Intersects the line `origin + t·dir` with triangle `(v0, v1, v2)`.
pub fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<TriangleHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    intersect_edges(origin, dir, &tri[0], &e1, &e2, e1.cross(&e2).norm_squared())
}

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::Vector3;

pub type V3 = Vector3<f64>;

/// Textbook Möller–Trumbore without any acceleration. Returns `t` for hits
/// strictly inside `(t_min, t_max)`.
pub fn tri_hit(o: &V3, d: &V3, a: &V3, b: &V3, c: &V3, t_min: f64, t_max: f64) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= 1e-12 * e1.norm() * e2.norm() * d.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(-1e-9..=1.0 + 1e-9).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -1e-9 || u + v > 1.0 + 1e-9 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > t_min && t < t_max).then_some(t)
}

/// Nearest hit over every triangle; ties go to the lower face index.
pub fn brute_nearest(verts: &[V3], faces: &[[u32; 3]], o: &V3, d: &V3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in faces.iter().enumerate() {
        let [a, b, c] = f.map(|k| verts[k as usize]);
        if let Some(t) = tri_hit(o, d, &a, &b, &c, 1e-9, f64::INFINITY) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
    }
    best
}

/// True when any triangle blocks the open segment `(from + eps, to - eps)`.
pub fn brute_occluded(verts: &[V3], faces: &[[u32; 3]], from: &V3, to: &V3, eps: f64) -> bool {
    let delta = to - from;
    let dist = delta.norm();
    if dist <= 2.0 * eps {
        return false;
    }
    let d = delta / dist;
    faces.iter().any(|f| {
        let [a, b, c] = f.map(|k| verts[k as usize]);
        tri_hit(from, &d, &a, &b, &c, eps, dist - eps).is_some()
    })
}

/// Pseudo-random points from a fixed-seed xorshift, independent of `rand`.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

//! Scene fixtures on disk and independent oracles for the CLI tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use splatstereo::colmap::write_binary_model;
use splatstereo::formats::ply::PlyEncoding;
use splatstereo::geometry::Vec3;
use splatstereo::mesh::write_mesh_ply;
use splatstereo::procedural;
use splatstereo::splat::{write_splats, SplatScene};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splatstereo"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the cube-and-wall toy scene: `sparse/0` binary model, `mesh.ply`
/// and a splat version `splats.ply` with a flat splat grid on every face.
pub fn write_toy_scene(dir: &Path, width: usize, height: usize) -> PathBuf {
    let scene = procedural::cube_and_wall_scene(width, height);
    write_binary_model(&scene.model, dir.join("sparse/0")).unwrap();
    let mut ply = Vec::new();
    write_mesh_ply(&scene.mesh, &mut ply, PlyEncoding::BinaryLittleEndian).unwrap();
    std::fs::write(dir.join("mesh.ply"), ply).unwrap();

    let mut splats = Vec::new();
    let gray = [0.7, 0.7, 0.7];
    for (n, u, v) in [
        (Vec3::x(), Vec3::y(), Vec3::z()),
        (-Vec3::x(), Vec3::z(), Vec3::y()),
        (Vec3::y(), Vec3::z(), Vec3::x()),
        (-Vec3::y(), Vec3::x(), Vec3::z()),
        (Vec3::z(), Vec3::x(), Vec3::y()),
        (-Vec3::z(), Vec3::y(), Vec3::x()),
    ] {
        splats.extend(procedural::splat_plane(n, u, v, 1.0, 1.0, 0.05, 0.95, gray));
    }
    splats.extend(procedural::splat_plane(Vec3::new(-0.6, 0.0, 2.2), Vec3::x(), Vec3::y(), 0.9, 1.2, 0.05, 0.95, [0.2, 0.5, 0.8]));
    let mut bytes = Vec::new();
    write_splats(&SplatScene::new(splats), &mut bytes).unwrap();
    std::fs::write(dir.join("splats.ply"), bytes).unwrap();
    dir.to_path_buf()
}

/// Same scene with two cameras whose principal points sit well off centre.
pub fn write_off_centre_model(dir: &Path) {
    use splatstereo::colmap::CameraIntrinsics;
    let mut scene = procedural::cube_and_wall_scene(320, 240);
    scene.model.cameras.insert(2, CameraIntrinsics::pinhole(2, 320, 240, 288.0, 288.0, 180.0, 120.0));
    scene.model.cameras.insert(3, CameraIntrinsics::pinhole(3, 320, 240, 288.0, 288.0, 160.0, 100.0));
    scene.model.images.get_mut(&2).unwrap().camera_id = 2;
    scene.model.images.get_mut(&5).unwrap().camera_id = 3;
    write_binary_model(&scene.model, dir.join("sparse/0")).unwrap();
}

/// Textbook Möller–Trumbore without acceleration. Returns `t` for hits
/// strictly inside `(t_min, t_max)`.
pub fn tri_hit(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
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
pub fn brute_nearest(verts: &[Vec3], faces: &[[u32; 3]], o: &Vec3, d: &Vec3) -> Option<(usize, f64)> {
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
pub fn brute_occluded(verts: &[Vec3], faces: &[[u32; 3]], from: &Vec3, to: &Vec3, eps: f64) -> bool {
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

/// Fixed-seed xorshift, independent of the library's RNG use.
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

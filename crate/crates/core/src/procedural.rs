//! Procedural meshes, poses and splat sets for demos and tests.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::Rng;

use crate::colmap::{CameraId, CameraIntrinsics, ImageId, PosedImage, SceneModel};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;
use crate::splat::{Splat, SplatScene};

fn mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("procedural mesh indices are in range")
}

pub fn triangle(a: Vec3, b: Vec3, c: Vec3) -> TriangleMesh {
    mesh(vec![a, b, c], vec![[0, 1, 2]])
}

/// Regular tetrahedron with outward-facing winding, circumradius `size`.
pub fn tetrahedron(center: Vec3, size: f64) -> TriangleMesh {
    let s = size / 3f64.sqrt();
    let v = [
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ]
    .map(|p| center + p * s);
    mesh(v.to_vec(), vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

/// Axis-aligned cube, 8 vertices and 12 outward-wound faces.
///
/// Vertex `i` has coordinate `center ± half` per axis, with bit 0 of `i`
/// selecting +x, bit 1 +y and bit 2 +z.
pub fn cube(center: Vec3, half: f64) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            let sign = |bit: u32| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
            center + Vec3::new(sign(0), sign(1), sign(2)) * half
        })
        .collect();
    let faces = vec![
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
    ];
    mesh(vertices, faces)
}

/// Rectangle spanning `center ± half_u·u ± half_v·v`, split into two
/// triangles whose normal is `u × v`.
pub fn quad(center: Vec3, u: Vec3, v: Vec3, half_u: f64, half_v: f64) -> TriangleMesh {
    let (du, dv) = (u * half_u, v * half_v);
    mesh(
        vec![center - du - dv, center + du - dv, center + du + dv, center - du + dv],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Regular `nx × ny` grid of quads in the plane `z = center.z`, covering
/// `width × height`. Faces are wound with normal `-z`.
pub fn grid(center: Vec3, width: f64, height: f64, nx: usize, ny: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(
                center.x - width / 2.0 + width * i as f64 / nx as f64,
                center.y - height / 2.0 + height * j as f64 / ny as f64,
                center.z,
            ));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
        }
    }
    mesh(vertices, faces)
}

fn uniform_point(rng: &mut impl Rng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..=r), rng.gen_range(-r..=r), rng.gen_range(-r..=r))
}

/// `n` unconnected triangles with centres uniform in `[-1, 1]³` and vertex
/// offsets uniform in `[-size, size]³`.
pub fn random_soup(rng: &mut impl Rng, n: usize, size: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(3 * n);
    let mut faces = Vec::with_capacity(n);
    for f in 0..n {
        let c = uniform_point(rng, 1.0);
        for _ in 0..3 {
            vertices.push(c + uniform_point(rng, size));
        }
        let b = 3 * f as u32;
        faces.push([b, b + 1, b + 2]);
    }
    mesh(vertices, faces)
}

/// Camera at `eye` looking at `target`. `up` is the world direction that
/// should appear upwards in the image (the camera's `-y`).
pub fn look_at(image_id: ImageId, camera_id: CameraId, eye: Vec3, target: Vec3, up: Vec3, name: &str) -> PosedImage {
    let z = (target - eye).normalize();
    let x = (-up).cross(&z).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    PosedImage {
        image_id,
        camera_id,
        rotation,
        translation: -(rotation * eye),
        name: name.to_string(),
    }
}

/// Centred pinhole camera with a horizontal field of view of about 58°.
pub fn default_intrinsics(camera_id: CameraId, width: usize, height: usize) -> CameraIntrinsics {
    let f = 0.9 * width as f64;
    CameraIntrinsics::pinhole(camera_id, width, height, f, f, width as f64 / 2.0, height as f64 / 2.0)
}

/// A mesh with a COLMAP model of cameras looking at it.
#[derive(Debug, Clone)]
pub struct ToyScene {
    pub mesh: TriangleMesh,
    pub model: SceneModel,
}

/// World up direction used by the toy scenes (COLMAP's `y` points down).
pub const TOY_UP: Vec3 = Vec3::new(0.0, -1.0, 0.0);

/// Unit cube (half-size 1) at the origin, partly hidden by a wall at
/// `z = 2.2`, seen by six cameras on an arc of radius 6 in front of it.
pub fn cube_and_wall_scene(width: usize, height: usize) -> ToyScene {
    let cube = cube(Vec3::zeros(), 1.0);
    let wall = quad(Vec3::new(-0.6, 0.0, 2.2), Vec3::x(), Vec3::y(), 0.9, 1.2);
    let mut model = SceneModel::default();
    model.cameras.insert(1, default_intrinsics(1, width, height));
    for (k, deg) in [-75.0f64, -45.0, -15.0, 15.0, 45.0, 75.0].iter().enumerate() {
        let a = deg.to_radians();
        let eye = Vec3::new(6.0 * a.sin(), -2.0, 6.0 * a.cos());
        let id = k as ImageId + 1;
        model
            .images
            .insert(id, look_at(id, 1, eye, Vec3::zeros(), TOY_UP, &format!("view_{id:02}.png")));
    }
    ToyScene {
        mesh: cube.merged(&wall),
        model,
    }
}

/// Flat square-lattice splats on a rectangle `center ± half_u·u ± half_v·v`
/// (`u`, `v` orthonormal). In-plane std. dev. equals `spacing`, enough
/// overlap for an opaque surface; thickness is negligible.
#[allow(clippy::too_many_arguments)]
pub fn splat_plane(
    center: Vec3,
    u: Vec3,
    v: Vec3,
    half_u: f64,
    half_v: f64,
    spacing: f64,
    opacity: f64,
    color: [f64; 3],
) -> Vec<Splat> {
    let n = u.cross(&v);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[u, v, n]));
    let rotation = UnitQuaternion::from_rotation_matrix(&rot);
    let scale = Vec3::new(spacing, spacing, 1e-3 * spacing);
    let nu = (2.0 * half_u / spacing).round() as i64;
    let nv = (2.0 * half_v / spacing).round() as i64;
    let mut out = Vec::with_capacity(((nu + 1) * (nv + 1)) as usize);
    for j in 0..=nv {
        for i in 0..=nu {
            let mean = center + u * (-half_u + i as f64 * spacing) + v * (-half_v + j as f64 * spacing);
            out.push(Splat {
                mean,
                scale,
                rotation,
                opacity,
                color,
            });
        }
    }
    out
}

/// A near plane covering `x ≤ 0` in front of a far plane, as both splats
/// and triangles, seen from the identity pose. The occlusion edge projects
/// to the principal point column.
pub struct EdgeScene {
    pub splats: SplatScene,
    pub mesh: TriangleMesh,
    pub near_z: f64,
    pub far_z: f64,
}

pub fn occlusion_edge_scene() -> EdgeScene {
    let (near_z, far_z) = (2.0, 4.0);
    let near_center = Vec3::new(-0.75, 0.0, near_z);
    let far_center = Vec3::new(0.0, 0.0, far_z);
    let mut splats = splat_plane(near_center, Vec3::x(), Vec3::y(), 0.75, 1.5, 0.02, 0.95, [0.9, 0.3, 0.2]);
    splats.extend(splat_plane(far_center, Vec3::x(), Vec3::y(), 3.0, 3.0, 0.04, 0.95, [0.2, 0.4, 0.9]));
    let mesh = quad(near_center, Vec3::x(), Vec3::y(), 0.75, 1.5).merged(&quad(far_center, Vec3::x(), Vec3::y(), 3.0, 3.0));
    EdgeScene {
        splats: SplatScene::new(splats),
        mesh,
        near_z,
        far_z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colmap::project;

    #[test]
    fn cube_faces_point_outwards() {
        let c = cube(Vec3::new(1.0, 2.0, 3.0), 0.5);
        for f in 0..c.face_count() {
            let [a, b, d] = c.triangle(f);
            let centroid = (a + b + d) / 3.0;
            assert!(c.face_normal(f).dot(&(centroid - Vec3::new(1.0, 2.0, 3.0))) > 0.0);
        }
    }

    #[test]
    fn tetrahedron_faces_point_outwards() {
        let t = tetrahedron(Vec3::zeros(), 1.0);
        for f in 0..4 {
            let [a, b, c] = t.triangle(f);
            assert!(t.face_normal(f).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn look_at_centres_target() {
        let intr = default_intrinsics(1, 64, 48);
        let pose = look_at(1, 1, Vec3::new(3.0, -1.0, 4.0), Vec3::new(0.5, 0.0, 0.0), TOY_UP, "a");
        let p = project(&intr, &pose, &Vec3::new(0.5, 0.0, 0.0)).unwrap();
        assert!((p.u - 32.0).abs() < 1e-9 && (p.v - 24.0).abs() < 1e-9);
        // Points above the target (world -y) land in the upper half.
        let above = project(&intr, &pose, &Vec3::new(0.5, -0.3, 0.0)).unwrap();
        assert!(above.v < 24.0);
        assert!((pose.center() - Vec3::new(3.0, -1.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn toy_scene_sees_cube_from_every_camera() {
        let s = cube_and_wall_scene(64, 48);
        assert_eq!(s.model.images.len(), 6);
        for pose in s.model.images.values() {
            assert!(project(&s.model.cameras[&1], pose, &Vec3::zeros()).is_some());
        }
    }
}

mod common;

use common::XorShift;
use nalgebra::{Matrix2, Matrix3, UnitQuaternion, Vector2, Vector3};
use proptest::prelude::*;
use splatstereo::colmap::{CameraIntrinsics, PosedImage};
use splatstereo::geometry::Vec3;
use splatstereo::raster::Resolution;
use splatstereo::splat::{
    composite_pixel_with, project_splat, read_splats, render_splats_with, write_splats, CompositeOptions, RenderOptions,
    Splat, Splat2D, SplatScene, COV2D_DILATION,
};

/// Front-to-back compositing written directly from the sum-product form,
/// recomputing every transmittance from scratch.
fn naive(stack: &[Splat2D], p: (f64, f64)) -> ([f64; 3], f64, f64) {
    let alpha = |s: &Splat2D| {
        let inv = s.cov2d.try_inverse().unwrap();
        let d = Vector2::new(p.0 - s.mean2d.x, p.1 - s.mean2d.y);
        s.opacity * (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp()
    };
    let mut color = [0.0; 3];
    let mut acc = 0.0;
    for i in 0..stack.len() {
        let t: f64 = stack[..i].iter().map(|s| 1.0 - alpha(s)).product();
        let w = alpha(&stack[i]) * t;
        for c in 0..3 {
            color[c] += stack[i].color[c] * w;
        }
        acc += w;
    }
    let t_n = stack.iter().map(|s| 1.0 - alpha(s)).product();
    (color, acc, t_n)
}

fn random_stack(rng: &mut XorShift, n: usize) -> Vec<Splat2D> {
    let mut depths: Vec<f64> = (0..n).map(|_| rng.range(0.5, 20.0)).collect();
    depths.sort_by(f64::total_cmp);
    depths
        .into_iter()
        .map(|z| {
            let a = rng.range(0.5, 6.0);
            let c = rng.range(0.5, 6.0);
            let b = rng.range(-0.9, 0.9) * (a * c).sqrt();
            Splat2D::new(
                Vector2::new(rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)),
                Matrix2::new(a, b, b, c),
                z,
                rng.range(0.0, 1.0),
                [rng.next_f64(), rng.next_f64(), rng.next_f64()],
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn matches_naive_compositing_on_random_stacks() {
    let mut rng = XorShift(0x5eed);
    for _ in 0..1000 {
        let stack = random_stack(&mut rng, 10);
        let p = (rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
        let got = composite_pixel_with(&stack, p, &CompositeOptions::exact());
        let (color, alpha, t_n) = naive(&stack, p);
        for c in 0..3 {
            assert!((got.color[c] - color[c]).abs() <= 1e-12);
        }
        assert!((got.alpha - alpha).abs() <= 1e-12);
        assert!((got.transmittance - t_n).abs() <= 1e-12);
        assert!((got.alpha + got.transmittance - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn single_and_two_splat_identities() {
    let at = |z: f64, o: f64, c: [f64; 3]| Splat2D::new(Vector2::zeros(), Matrix2::identity(), z, o, c).unwrap();
    let c1 = [0.2, 0.4, 0.6];
    let c2 = [0.9, 0.1, 0.3];
    let one = composite_pixel_with(&[at(1.0, 1.0, c1)], (0.0, 0.0), &CompositeOptions::exact());
    assert_eq!(one.color, c1);
    let two = composite_pixel_with(&[at(1.0, 0.5, c1), at(2.0, 0.5, c2)], (0.0, 0.0), &CompositeOptions::exact());
    for c in 0..3 {
        assert!((two.color[c] - (0.5 * c1[c] + 0.25 * c2[c])).abs() < 1e-15);
    }
}

fn cam() -> (CameraIntrinsics, PosedImage) {
    (
        CameraIntrinsics::pinhole(1, 640, 480, 500.0, 500.0, 320.0, 240.0),
        PosedImage::from_wxyz(1, 1, [1.0, 0.0, 0.0, 0.0], Vec3::zeros(), "c").unwrap(),
    )
}

fn off_axis_splat() -> Splat {
    let z = 4.0;
    let field = 20f64.to_radians();
    Splat {
        mean: Vec3::new(z * field.tan() * 0.8, z * field.tan() * 0.6, z),
        scale: Vec3::new(0.02, 0.01, 0.005),
        rotation: UnitQuaternion::from_euler_angles(0.3, -0.4, 0.7),
        opacity: 0.8,
        color: [1.0; 3],
    }
}

#[test]
fn cov2d_matches_finite_difference_jacobian_off_axis() {
    let (intr, pose) = cam();
    let s = off_axis_splat();
    let angle = s.mean.angle(&Vec3::z()).to_degrees();
    assert!((angle - 20.0).abs() < 1e-9);
    let proj = |p: &Vector3<f64>| Vector2::new(intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy);
    let h = 1e-6;
    let mut jac = nalgebra::Matrix2x3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = h;
        let d = (proj(&(s.mean + e)) - proj(&(s.mean - e))) / (2.0 * h);
        jac.set_column(k, &d);
    }
    let r = s.rotation.to_rotation_matrix().into_inner();
    let sigma = r * Matrix3::from_diagonal(&s.scale.component_mul(&s.scale)) * r.transpose();
    let expected = jac * sigma * jac.transpose() + Matrix2::identity() * COV2D_DILATION;
    let got = project_splat(&s, &intr, &pose).unwrap().cov2d;
    let rel = (got - expected).norm() / expected.norm();
    assert!(rel < 0.05, "relative Frobenius error {rel}");
    assert!(rel < 1e-6, "finite differences should agree much more closely: {rel}");
}

#[test]
fn cov2d_matches_monte_carlo_projection() {
    let (intr, pose) = cam();
    let s = off_axis_splat();
    let r = s.rotation.to_rotation_matrix().into_inner();
    let mut rng = XorShift(77);
    let gauss = |rng: &mut XorShift| {
        let (u, v) = (rng.next_f64().max(1e-300), rng.next_f64());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let n = 200_000;
    let samples: Vec<Vector2<f64>> = (0..n)
        .map(|_| {
            let local = Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)).component_mul(&s.scale);
            let p = s.mean + r * local;
            Vector2::new(intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy)
        })
        .collect();
    let mean = samples.iter().sum::<Vector2<f64>>() / n as f64;
    let cov = samples.iter().map(|p| (p - mean) * (p - mean).transpose()).sum::<Matrix2<f64>>() / (n - 1) as f64
        + Matrix2::identity() * COV2D_DILATION;
    let got = project_splat(&s, &intr, &pose).unwrap().cov2d;
    let rel = (got - cov).norm() / cov.norm();
    assert!(rel < 0.05, "relative Frobenius error {rel}");
}

#[test]
fn golden_file_activations() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let scene = splatstereo::splat::load_splats(dir.join("splats10.ply")).unwrap();
    let expected: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("splats10_expected.json")).unwrap()).unwrap();
    let expected = expected.as_array().unwrap();
    assert_eq!(scene.len(), 10);
    let v = |x: &serde_json::Value| x.as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect::<Vec<_>>();
    for (s, e) in scene.splats.iter().zip(expected) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
        assert!(v(&e["mean"]).iter().zip(s.mean.iter()).all(|(a, b)| close(*b, *a)));
        assert!(v(&e["scale"]).iter().zip(s.scale.iter()).all(|(a, b)| close(*b, *a)));
        assert!(close(s.opacity, e["opacity"].as_f64().unwrap()));
        let q = v(&e["rotation_wxyz"]);
        let got = [s.rotation.w, s.rotation.i, s.rotation.j, s.rotation.k];
        assert!(q.iter().zip(got).all(|(a, b)| close(b, *a)));
        assert!(v(&e["color"]).iter().zip(s.color).all(|(a, b)| close(b, *a)));
    }
}

fn grid_scene(rng: &mut XorShift, n: usize) -> SplatScene {
    SplatScene::new(
        (0..n)
            .map(|_| Splat {
                mean: Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(2.0, 6.0)),
                scale: Vec3::new(rng.range(0.02, 0.2), rng.range(0.02, 0.2), rng.range(0.02, 0.2)),
                rotation: UnitQuaternion::from_euler_angles(rng.range(-3.0, 3.0), rng.range(-3.0, 3.0), rng.range(-3.0, 3.0)),
                opacity: rng.range(0.1, 1.0),
                color: [1.0; 3],
            })
            .collect(),
    )
}

#[test]
fn white_splats_render_color_equal_to_alpha() {
    let (intr, pose) = cam();
    let intr = intr.scaled_to(Resolution::new(64, 48));
    let scene = grid_scene(&mut XorShift(3), 60);
    let r = render_splats_with(&scene, &intr, &pose, intr.resolution(), &RenderOptions::default());
    for (px, a) in r.image.pixels.as_slice().iter().zip(r.alpha.values.as_slice()) {
        for c in px {
            assert!((c - a).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_is_invariant_to_splat_order(seed in 1u64.., rot in 0usize..60) {
        let (intr, pose) = cam();
        let intr = intr.scaled_to(Resolution::new(48, 36));
        let scene = grid_scene(&mut XorShift(seed), 60);
        let mut shuffled = scene.splats.clone();
        shuffled.rotate_left(rot);
        shuffled.reverse();
        let a = render_splats_with(&scene, &intr, &pose, intr.resolution(), &RenderOptions::default());
        let b = render_splats_with(&SplatScene::new(shuffled), &intr, &pose, intr.resolution(), &RenderOptions::default());
        prop_assert_eq!(a.alpha, b.alpha);
        prop_assert_eq!(a.image, b.image);
    }

    #[test]
    fn conservation_holds_with_default_thresholds(seed in 1u64.., n in 1usize..30) {
        let stack = random_stack(&mut XorShift(seed), n);
        let c = composite_pixel_with(&stack, (0.1, -0.2), &CompositeOptions::default());
        prop_assert!((c.alpha + c.transmittance - 1.0).abs() <= 1e-9);
    }

    // Any positive rescaling of the stored quaternion loads to the same rotation.
    #[test]
    fn stored_quaternion_is_renormalized(k in 0.01f64..100.0, seed in 1u64..) {
        let mut rng = XorShift(seed);
        let scene = grid_scene(&mut rng, 3);
        let mut bytes = Vec::new();
        write_splats(&scene, &mut bytes).unwrap();
        let back = read_splats(std::io::Cursor::new(&bytes)).unwrap();
        let mut scaled = scene.clone();
        for s in &mut scaled.splats {
            let q = s.rotation.into_inner() * k;
            s.rotation = UnitQuaternion::new_unchecked(q);
        }
        let mut bytes2 = Vec::new();
        write_splats(&scaled, &mut bytes2).unwrap();
        let back2 = read_splats(std::io::Cursor::new(&bytes2)).unwrap();
        for (a, b) in back.splats.iter().zip(&back2.splats) {
            prop_assert!(a.rotation.angle_to(&b.rotation) < 1e-5);
            prop_assert!((a.rotation.into_inner().norm() - 1.0).abs() < 1e-12);
        }
    }
}

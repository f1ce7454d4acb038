mod common;

use common::{brute_occluded, V3};
use splatstereo::colmap::SceneModel;
use splatstereo::mesh::{build_bvh, TriangleMesh};
use splatstereo::observability::{
    ranked, score_cameras, select_top_k, vertex_observability, vertex_observability_with, CameraScore,
    ObservabilityField, ObservabilityOptions,
};
use splatstereo::procedural::{self, look_at, TOY_UP};

/// Exhaustive enumeration: every camera against every vertex, occlusion by
/// testing every triangle, angles via atan2.
fn brute_force_counts(mesh: &TriangleMesh, model: &SceneModel, limit_deg: Option<f64>) -> Vec<u32> {
    let verts = mesh.vertices();
    let mut normals = vec![V3::zeros(); verts.len()];
    for f in mesh.faces() {
        let [a, b, c] = f.map(|k| verts[k as usize]);
        let n = (b - a).cross(&(c - a));
        for k in f {
            normals[*k as usize] += n;
        }
    }
    let b = mesh.bounds();
    let eps = 1e-4 * (b.max - b.min).norm();
    verts
        .iter()
        .zip(&normals)
        .map(|(v, n)| {
            model
                .images
                .values()
                .filter(|img| {
                    let cam = &model.cameras[&img.camera_id];
                    let r = img.rotation.to_rotation_matrix();
                    let pc = r * v + img.translation;
                    if pc.z <= 0.0 {
                        return false;
                    }
                    let u = cam.fx * pc.x / pc.z + cam.cx;
                    let w = cam.fy * pc.y / pc.z + cam.cy;
                    if !(u >= 0.0 && u < cam.width as f64 && w >= 0.0 && w < cam.height as f64) {
                        return false;
                    }
                    let center = -(r.transpose() * img.translation);
                    let to_cam = center - v;
                    if let Some(lim) = limit_deg {
                        if n.norm() > 0.0 && to_cam.cross(n).norm().atan2(to_cam.dot(n)).to_degrees() > lim {
                            return false;
                        }
                    }
                    !brute_occluded(verts, mesh.faces(), &center, v, eps)
                })
                .count() as u32
        })
        .collect()
}

#[test]
fn toy_scene_counts_match_enumeration() {
    let scene = procedural::cube_and_wall_scene(320, 240);
    let accel = build_bvh(scene.mesh.clone()).unwrap();
    let filtered = vertex_observability(&accel, &scene.model, 80.0).unwrap();
    assert_eq!(filtered.counts, brute_force_counts(&scene.mesh, &scene.model, Some(80.0)));
    assert_eq!(filtered.max_possible, 6);
    let unfiltered = vertex_observability_with(&accel, &scene.model, &ObservabilityOptions { grazing_limit_deg: None, epsilon: None }).unwrap();
    assert_eq!(unfiltered.counts, brute_force_counts(&scene.mesh, &scene.model, None));
    // The wall hides part of the cube from some cameras, and the filter
    // removes at least one view somewhere.
    assert!(unfiltered.counts.iter().any(|&c| c < 6));
    assert!(filtered.counts.iter().zip(&unfiltered.counts).any(|(f, u)| f < u));
    assert!(filtered.counts.iter().zip(&unfiltered.counts).all(|(f, u)| f <= u));
}

#[test]
fn tighter_limit_never_adds_views() {
    let scene = procedural::cube_and_wall_scene(160, 120);
    let accel = build_bvh(scene.mesh.clone()).unwrap();
    let mut previous: Option<ObservabilityField> = None;
    for limit in [89.0, 85.0, 80.0, 60.0, 30.0] {
        let f = vertex_observability(&accel, &scene.model, limit).unwrap();
        assert_eq!(f.counts.len(), 12, "limit {limit}");
        assert_eq!(f.counts, brute_force_counts(&scene.mesh, &scene.model, Some(limit)), "limit {limit}");
        if let Some(p) = &previous {
            assert!(f.counts.iter().zip(&p.counts).all(|(a, b)| a <= b));
        }
        previous = Some(f);
    }
}

#[test]
fn camera_seeing_whole_object_ranks_first() {
    let mut model = SceneModel::default();
    model.cameras.insert(1, procedural::default_intrinsics(1, 160, 120));
    let object = procedural::grid(V3::new(0.0, 0.0, 0.0), 2.0, 2.0, 10, 10);
    // Same distance and direction; B is shifted so only one corner of the
    // grid, about a tenth of its area, stays inside the frame.
    model.images.insert(1, look_at(1, 1, V3::new(0.0, 0.0, -4.0), V3::zeros(), TOY_UP, "a"));
    let b_eye = V3::new(2.59, 2.04, -4.0);
    model.images.insert(2, look_at(2, 1, b_eye, b_eye + V3::z(), TOY_UP, "b"));
    let accel = build_bvh(object).unwrap();
    let field = vertex_observability(&accel, &model, 80.0).unwrap();
    let scores = score_cameras(&accel, &field, &model, None).unwrap();
    assert_eq!(select_top_k(&scores, 1), vec![1]);

    let scaled = ObservabilityField {
        counts: field.counts.iter().map(|c| c * 7).collect(),
        max_possible: field.max_possible * 7,
    };
    let rescored = score_cameras(&accel, &scaled, &model, None).unwrap();
    let ids = |s: &[CameraScore]| s.iter().map(|c| c.image_id).collect::<Vec<_>>();
    assert_eq!(ids(&rescored), ids(&scores));
}

#[test]
fn ties_rank_by_image_id() {
    let s = ranked(vec![
        CameraScore { image_id: 9, score: 1.0 },
        CameraScore { image_id: 2, score: 3.0 },
        CameraScore { image_id: 4, score: 1.0 },
    ]);
    assert_eq!(s.iter().map(|c| c.image_id).collect::<Vec<_>>(), vec![2, 4, 9]);
    assert_eq!(select_top_k(&s, 10).len(), 3);
}

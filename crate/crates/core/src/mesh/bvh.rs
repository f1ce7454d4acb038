//! Bounding volume hierarchy over mesh triangles.
//!
//! Built top-down with a binned surface-area heuristic. Nodes are stored in
//! depth-first order: an interior node's left child directly follows it.

use super::triangle::{intersect_edges, TriangleHit};
use super::{MeshError, TriangleMesh};
use crate::geometry::{Aabb, Ray, Vec3};

/// Leaves hold at most this many triangles.
pub const MAX_LEAF_TRIANGLES: usize = 4;

/// Hits at `t <= RAY_EPSILON` are ignored by [`intersect`].
pub const RAY_EPSILON: f64 = 1e-9;

const SAH_BINS: usize = 16;
/// Below this depth splits use SAH; deeper nodes fall back to median splits
/// so the tree depth stays bounded.
const SAH_MAX_DEPTH: usize = 48;
const STACK_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face_index: usize,
    /// Weights of the face's three vertices, in face order.
    pub barycentric: [f64; 3],
    /// Unit normal `(v1 - v0) × (v2 - v0)`, not flipped towards the ray.
    pub geometric_normal: Vec3,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot. Interior: index of the right child.
    index: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    n2: f64,
    face: u32,
}

#[derive(Debug, Clone, Copy)]
struct PrimRef {
    bounds: Aabb,
    centroid: Vec3,
    face: u32,
}

/// A mesh with a BVH for nearest-hit and occlusion queries.
#[derive(Debug, Clone)]
pub struct AcceleratedMesh {
    mesh: TriangleMesh,
    nodes: Vec<Node>,
    tris: Vec<Tri>,
    bounds: Aabb,
}

struct Builder {
    nodes: Vec<Node>,
}

impl Builder {
    fn build(&mut self, refs: &mut [PrimRef], offset: usize, depth: usize) {
        let node_idx = self.nodes.len();
        let bounds = refs.iter().fold(Aabb::empty(), |b, r| b.union(&r.bounds));
        self.nodes.push(Node {
            bounds,
            index: offset as u32,
            count: refs.len() as u32,
        });
        if refs.len() <= MAX_LEAF_TRIANGLES {
            return;
        }
        let mid = if depth < SAH_MAX_DEPTH {
            sah_partition(refs).unwrap_or_else(|| median_partition(refs))
        } else {
            median_partition(refs)
        };
        let (left, right) = refs.split_at_mut(mid);
        self.build(left, offset, depth + 1);
        let right_idx = self.nodes.len();
        self.build(right, offset + mid, depth + 1);
        self.nodes[node_idx].index = right_idx as u32;
        self.nodes[node_idx].count = 0;
    }
}

fn centroid_bounds(refs: &[PrimRef]) -> Aabb {
    Aabb::from_points(refs.iter().map(|r| &r.centroid))
}

fn partition_in_place(refs: &mut [PrimRef], pred: impl Fn(&PrimRef) -> bool) -> usize {
    let mut i = 0;
    for j in 0..refs.len() {
        if pred(&refs[j]) {
            refs.swap(i, j);
            i += 1;
        }
    }
    i
}

fn sah_partition(refs: &mut [PrimRef]) -> Option<usize> {
    let cb = centroid_bounds(refs);
    let mut best: Option<(f64, usize, usize)> = None; // cost, axis, split bin
    for axis in 0..3 {
        let lo = cb.min[axis];
        let extent = cb.max[axis] - lo;
        if !(extent > 0.0) {
            continue;
        }
        let scale = SAH_BINS as f64 / extent;
        let bin_of = |r: &PrimRef| (((r.centroid[axis] - lo) * scale) as usize).min(SAH_BINS - 1);
        let mut counts = [0usize; SAH_BINS];
        let mut boxes = [Aabb::empty(); SAH_BINS];
        for r in refs.iter() {
            let b = bin_of(r);
            counts[b] += 1;
            boxes[b].grow(&r.bounds);
        }
        // Sweep from the right to get suffix areas, then from the left.
        let mut right_area = [0.0; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::empty();
        let mut n = 0;
        for i in (1..SAH_BINS).rev() {
            acc.grow(&boxes[i]);
            n += counts[i];
            right_area[i] = acc.surface_area();
            right_count[i] = n;
        }
        let mut acc = Aabb::empty();
        let mut n = 0;
        for i in 1..SAH_BINS {
            acc.grow(&boxes[i - 1]);
            n += counts[i - 1];
            if n == 0 || right_count[i] == 0 {
                continue;
            }
            let cost = acc.surface_area() * n as f64 + right_area[i] * right_count[i] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, i));
            }
        }
    }
    let (_, axis, split) = best?;
    let lo = cb.min[axis];
    let scale = SAH_BINS as f64 / (cb.max[axis] - lo);
    let mid = partition_in_place(refs, |r| {
        ((((r.centroid[axis] - lo) * scale) as usize).min(SAH_BINS - 1)) < split
    });
    (mid > 0 && mid < refs.len()).then_some(mid)
}

fn median_partition(refs: &mut [PrimRef]) -> usize {
    let e = centroid_bounds(refs).extent();
    let axis = if e.x >= e.y && e.x >= e.z {
        0
    } else if e.y >= e.z {
        1
    } else {
        2
    };
    let mid = refs.len() / 2;
    refs.select_nth_unstable_by(mid, |a, b| {
        a.centroid[axis]
            .total_cmp(&b.centroid[axis])
            .then(a.face.cmp(&b.face))
    });
    mid
}

/// Builds the BVH. Fails on a mesh without faces.
pub fn build_bvh(mesh: TriangleMesh) -> Result<AcceleratedMesh, MeshError> {
    if mesh.face_count() == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let bounds = mesh.bounds();
    let coord_scale = bounds.min.abs().max().max(bounds.max.abs().max());
    let mut refs: Vec<PrimRef> = (0..mesh.face_count())
        .map(|f| {
            let tri = mesh.triangle(f);
            let b = Aabb::from_points(&tri);
            // Boxes are padded so that edge-tolerant hits just outside a
            // triangle, and slab rounding, never cull a valid hit.
            let pad = 1e-8 * b.diagonal() + 1e-12 * coord_scale;
            PrimRef {
                bounds: b.padded(pad),
                centroid: b.centroid(),
                face: f as u32,
            }
        })
        .collect();
    let mut builder = Builder {
        nodes: Vec::with_capacity(2 * refs.len() / MAX_LEAF_TRIANGLES + 1),
    };
    builder.build(&mut refs, 0, 0);
    let tris = refs
        .iter()
        .map(|r| {
            let [a, b, c] = mesh.triangle(r.face as usize);
            let e1 = b - a;
            let e2 = c - a;
            Tri {
                v0: a,
                e1,
                e2,
                n2: e1.cross(&e2).norm_squared(),
                face: r.face,
            }
        })
        .collect();
    Ok(AcceleratedMesh {
        mesh,
        nodes: builder.nodes,
        tris,
        bounds,
    })
}

impl AcceleratedMesh {
    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Diagonal of the mesh bounding box.
    pub fn scene_diameter(&self) -> f64 {
        self.bounds.diagonal()
    }

    /// Self-occlusion epsilon used when none is given: `1e-4` of the scene
    /// diameter.
    pub fn default_epsilon(&self) -> f64 {
        1e-4 * self.scene_diameter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    /// Checks the structural invariants: every face sits in exactly one leaf,
    /// leaves respect the size limit, parents contain their children and
    /// leaves contain their triangles.
    pub fn check_structure(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.mesh.face_count()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if n.count > 0 {
                if n.count as usize > MAX_LEAF_TRIANGLES {
                    return Err(format!("leaf {i} holds {} triangles", n.count));
                }
                for slot in n.index..n.index + n.count {
                    let face = self.tris[slot as usize].face as usize;
                    seen[face] += 1;
                    let tb = Aabb::from_points(&self.mesh.triangle(face));
                    if !n.bounds.contains_box(&tb) {
                        return Err(format!("leaf {i} does not contain face {face}"));
                    }
                }
            } else {
                let (l, r) = (i + 1, n.index as usize);
                for c in [l, r] {
                    if !n.bounds.contains_box(&self.nodes[c].bounds) {
                        return Err(format!("node {i} does not contain child {c}"));
                    }
                }
                stack.push(l);
                stack.push(r);
            }
        }
        match seen.iter().position(|&c| c != 1) {
            Some(f) => Err(format!("face {f} appears in {} leaves", seen[f])),
            None => Ok(()),
        }
    }

    fn traverse(&self, ray: &Ray, t_min: f64, t_max: f64, any_hit: bool) -> Option<(TriangleHit, u32, usize)> {
        let o = ray.origin;
        let d = ray.direction;
        let inv = d.map(|c| 1.0 / c);
        let mut best: Option<(TriangleHit, u32, usize)> = None;
        let mut best_t = t_max;
        let mut stack = [(0u32, 0.0f64); STACK_SIZE];
        stack[0] = (0, self.nodes[0].bounds.hit(&o, &inv, t_min, t_max)?);
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let (idx, entry) = stack[sp];
            if entry > best_t {
                continue;
            }
            let node = &self.nodes[idx as usize];
            if node.count > 0 {
                let start = node.index as usize;
                for slot in start..start + node.count as usize {
                    let tri = &self.tris[slot];
                    let Some(h) = intersect_edges(&o, &d, &tri.v0, &tri.e1, &tri.e2, tri.n2) else {
                        continue;
                    };
                    if !(h.t > t_min && h.t < t_max) {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((bh, bf, _)) => h.t < bh.t || (h.t == bh.t && tri.face < *bf),
                    };
                    if better {
                        best = Some((h, tri.face, slot));
                        best_t = h.t;
                        if any_hit {
                            return best;
                        }
                    }
                }
            } else {
                let l = idx + 1;
                let r = node.index;
                let hl = self.nodes[l as usize].bounds.hit(&o, &inv, t_min, best_t);
                let hr = self.nodes[r as usize].bounds.hit(&o, &inv, t_min, best_t);
                match (hl, hr) {
                    (Some(tl), Some(tr)) => {
                        // Near child on top.
                        let (near, far) = if tl <= tr { ((l, tl), (r, tr)) } else { ((r, tr), (l, tl)) };
                        stack[sp] = far;
                        stack[sp + 1] = near;
                        sp += 2;
                    }
                    (Some(tl), None) => {
                        stack[sp] = (l, tl);
                        sp += 1;
                    }
                    (None, Some(tr)) => {
                        stack[sp] = (r, tr);
                        sp += 1;
                    }
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Nearest hit with `t` in the open interval `(t_min, t_max)`. Equal-`t`
    /// hits resolve to the lowest face index.
    pub fn intersect_range(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let (h, face, slot) = self.traverse(ray, t_min, t_max, false)?;
        let tri = &self.tris[slot];
        Some(Hit {
            t: h.t,
            face_index: face as usize,
            barycentric: h.barycentric(),
            geometric_normal: tri.e1.cross(&tri.e2).normalize(),
        })
    }

    /// Whether any triangle is hit with `t` in `(t_min, t_max)`.
    pub fn any_hit(&self, ray: &Ray, t_min: f64, t_max: f64) -> bool {
        self.traverse(ray, t_min, t_max, true).is_some()
    }

    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<Hit> {
        self.intersect_range(ray, RAY_EPSILON, t_max)
    }

    /// Whether the open segment between `from` and `to`, shortened by
    /// `epsilon` at both ends, crosses the mesh.
    pub fn is_occluded(&self, from: &Vec3, to: &Vec3, epsilon: f64) -> bool {
        let delta = to - from;
        let dist = delta.norm();
        if !(dist > 2.0 * epsilon) {
            return false;
        }
        match Ray::new(*from, delta) {
            Some(ray) => self.any_hit(&ray, epsilon, dist - epsilon),
            None => false,
        }
    }
}

/// Nearest hit along `ray` with `t` in `(RAY_EPSILON, t_max)`.
pub fn intersect(accel: &AcceleratedMesh, ray: &Ray, t_max: f64) -> Option<Hit> {
    accel.intersect(ray, t_max)
}

pub fn is_occluded(accel: &AcceleratedMesh, from: &Vec3, to: &Vec3, epsilon: f64) -> bool {
    accel.is_occluded(from, to, epsilon)
}

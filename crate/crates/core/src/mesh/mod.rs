//! Triangle meshes: loading, largest-cluster filtering and BVH ray queries.

mod bvh;
mod components;
mod io;
mod triangle;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formats::ply::PlyError;
use crate::geometry::{Aabb, Vec3};
pub use bvh::{build_bvh, intersect, is_occluded, AcceleratedMesh, Hit, MAX_LEAF_TRIANGLES, RAY_EPSILON};
pub use components::{connected_components, keep_largest_cluster};
pub use io::{load_mesh, read_obj, read_ply_mesh, write_mesh_ply};
pub use triangle::{intersect_triangle, TriangleHit, EDGE_TOLERANCE};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("malformed mesh header: {0}")]
    MalformedHeader(String),
    #[error("truncated mesh body: {0}")]
    TruncatedBody(String),
    #[error("malformed mesh body: {0}")]
    MalformedBody(String),
    #[error("unsupported mesh encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("unsupported mesh file type: {0}")]
    UnsupportedFormat(String),
    #[error("face {face}: {reason}")]
    InvalidFace { face: usize, reason: String },
    #[error("attribute {name:?} has {len} values for {vertices} vertices")]
    AttributeLength {
        name: String,
        len: usize,
        vertices: usize,
    },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<PlyError> for MeshError {
    fn from(e: PlyError) -> Self {
        match e {
            PlyError::MalformedHeader(s) => MeshError::MalformedHeader(s),
            PlyError::TruncatedBody(s) => MeshError::TruncatedBody(s),
            PlyError::MalformedBody(s) => MeshError::MalformedBody(s),
            PlyError::UnsupportedEncoding(s) => MeshError::UnsupportedEncoding(s),
            PlyError::Io(e) => MeshError::Io(e),
        }
    }
}

pub type Face = [u32; 3];

/// Indexed triangle mesh with optional scalar per-vertex attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<Face>,
    attributes: BTreeMap<String, Vec<f64>>,
}

impl TriangleMesh {
    /// Validates indices and rejects fully collapsed faces (all three
    /// indices equal).
    pub fn new(vertices: Vec<Vec3>, faces: Vec<Face>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if let Some(bad) = f.iter().find(|&&v| v as usize >= n) {
                return Err(MeshError::InvalidFace {
                    face: i,
                    reason: format!("vertex index {bad} out of range for {n} vertices"),
                });
            }
            if f[0] == f[1] && f[1] == f[2] {
                return Err(MeshError::InvalidFace {
                    face: i,
                    reason: "all three indices identical".into(),
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            attributes: BTreeMap::new(),
        })
    }

    pub fn with_attribute(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self, MeshError> {
        self.set_attribute(name, values)?;
        Ok(self)
    }

    pub fn set_attribute(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), MeshError> {
        let name = name.into();
        if values.len() != self.vertices.len() {
            return Err(MeshError::AttributeLength {
                name,
                len: values.len(),
                vertices: self.vertices.len(),
            });
        }
        self.attributes.insert(name, values);
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn attributes(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&[f64]> {
        self.attributes.get(name).map(|v| v.as_slice())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Unnormalized face normal `(v1 - v0) × (v2 - v0)`; its length is twice
    /// the face area.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    /// Area-weighted vertex normals, normalized. Vertices without incident
    /// area get a zero vector.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (i, f) in self.faces.iter().enumerate() {
            let n = self.face_normal(i);
            for &v in f {
                acc[v as usize] += n;
            }
        }
        for n in &mut acc {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        acc
    }

    /// Concatenates two meshes. Attributes survive only when both meshes
    /// carry them.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| f.map(|v| v + offset)));
        let attributes = self
            .attributes
            .iter()
            .filter_map(|(k, a)| {
                other.attributes.get(k).map(|b| {
                    let mut v = a.clone();
                    v.extend_from_slice(b);
                    (k.clone(), v)
                })
            })
            .collect();
        TriangleMesh {
            vertices,
            faces,
            attributes,
        }
    }

    /// Keeps `faces` (in the given order) and the vertices they reference,
    /// renumbered in ascending original order.
    pub fn subset(&self, faces: &[usize]) -> TriangleMesh {
        let mut used = vec![false; self.vertices.len()];
        for &f in faces {
            for &v in &self.faces[f] {
                used[v as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for (i, u) in used.iter().enumerate() {
            if *u {
                remap[i] = kept.len() as u32;
                kept.push(i);
            }
        }
        TriangleMesh {
            vertices: kept.iter().map(|&i| self.vertices[i]).collect(),
            faces: faces
                .iter()
                .map(|&f| self.faces[f].map(|v| remap[v as usize]))
                .collect(),
            attributes: self
                .attributes
                .iter()
                .map(|(k, a)| (k.clone(), kept.iter().map(|&i| a[i]).collect()))
                .collect(),
        }
    }
}

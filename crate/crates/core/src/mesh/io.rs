use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;

use super::{Face, MeshError, TriangleMesh};
use crate::formats::ply::{
    read_ply, write_ply, Column, ElementData, ElementDef, PlyEncoding, PropertyDef, PropertyType,
    ScalarType,
};
use crate::geometry::Vec3;

/// Loads a `.ply` (ascii or binary little-endian) or `.obj` mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    let reader = BufReader::new(File::open(path)?);
    match ext.as_str() {
        "ply" => read_ply_mesh(reader),
        "obj" => read_obj(reader),
        _ => Err(MeshError::UnsupportedFormat(path.display().to_string())),
    }
}

/// Fan-triangulates polygons and drops faces whose three indices coincide.
struct FaceBuilder {
    faces: Vec<Face>,
    collapsed: usize,
    vertex_count: usize,
}

impl FaceBuilder {
    fn push_polygon(&mut self, poly: &[i64], record: usize) -> Result<(), MeshError> {
        if poly.len() < 3 {
            return Err(MeshError::MalformedBody(format!(
                "face record {record} has {} vertices",
                poly.len()
            )));
        }
        for &v in poly {
            if v < 0 || v as usize >= self.vertex_count {
                return Err(MeshError::InvalidFace {
                    face: record,
                    reason: format!("vertex index {v} out of range for {} vertices", self.vertex_count),
                });
            }
        }
        for k in 1..poly.len() - 1 {
            let f = [poly[0] as u32, poly[k] as u32, poly[k + 1] as u32];
            if f[0] == f[1] && f[1] == f[2] {
                self.collapsed += 1;
            } else {
                self.faces.push(f);
            }
        }
        Ok(())
    }

    fn finish(self, vertices: Vec<Vec3>) -> Result<TriangleMesh, MeshError> {
        if self.collapsed > 0 {
            warn!("dropped {} collapsed faces", self.collapsed);
        }
        TriangleMesh::new(vertices, self.faces)
    }
}

pub fn read_ply_mesh(reader: impl BufRead) -> Result<TriangleMesh, MeshError> {
    let data = read_ply(reader, |el, _| el == "vertex" || el == "face")?;
    let vertex = data
        .element("vertex")
        .ok_or_else(|| MeshError::MalformedHeader("no vertex element".into()))?;
    let coord = |name: &str| {
        vertex
            .scalar(name)
            .ok_or_else(|| MeshError::MalformedHeader(format!("vertex element lacks scalar property {name}")))
    };
    let (xs, ys, zs) = (coord("x")?, coord("y")?, coord("z")?);
    let vertices: Vec<Vec3> = (0..vertex.def.count)
        .map(|i| Vec3::new(xs[i], ys[i], zs[i]))
        .collect();

    let mut builder = FaceBuilder {
        faces: Vec::new(),
        collapsed: 0,
        vertex_count: vertices.len(),
    };
    if let Some(face) = data.element("face") {
        let lists = face
            .list("vertex_indices")
            .or_else(|| face.list("vertex_index"))
            .ok_or_else(|| MeshError::MalformedHeader("face element lacks vertex_indices list".into()))?;
        let mut poly = Vec::new();
        for (i, l) in lists.iter().enumerate() {
            poly.clear();
            poly.extend(l.iter().map(|v| *v as i64));
            builder.push_polygon(&poly, i)?;
        }
    }
    let mut mesh = builder.finish(vertices)?;
    for (p, col) in vertex.def.properties.iter().zip(&vertex.columns) {
        if matches!(p.name.as_str(), "x" | "y" | "z") {
            continue;
        }
        if let Column::Scalar(v) = col {
            mesh.set_attribute(p.name.clone(), v.clone())?;
        }
    }
    Ok(mesh)
}

/// Reads the `v`/`f` subset of Wavefront OBJ. Indices are 1-based; negative
/// indices count back from the most recent vertex.
pub fn read_obj(reader: impl BufRead) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    *slot = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| MeshError::MalformedBody(format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in toks {
                    let idx: i64 = t
                        .split('/')
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| MeshError::MalformedBody(format!("line {}: bad face index {t:?}", lineno + 1)))?;
                    let resolved = match idx {
                        0 => {
                            return Err(MeshError::MalformedBody(format!("line {}: face index 0", lineno + 1)))
                        }
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    poly.push(resolved);
                }
                polys.push((lineno + 1, poly));
            }
            _ => {}
        }
    }
    let mut builder = FaceBuilder {
        faces: Vec::new(),
        collapsed: 0,
        vertex_count: vertices.len(),
    };
    for (i, (_, poly)) in polys.iter().enumerate() {
        builder.push_polygon(poly, i)?;
    }
    builder.finish(vertices)
}

fn is_color_channel(name: &str) -> bool {
    matches!(name, "red" | "green" | "blue" | "alpha")
}

/// Writes a mesh as PLY. Coordinates are stored as `float`; attributes named
/// `red`, `green`, `blue` or `alpha` as `uchar`, everything else as `float`.
pub fn write_mesh_ply(mesh: &TriangleMesh, w: impl Write, encoding: PlyEncoding) -> Result<(), MeshError> {
    let n = mesh.vertex_count();
    let mut props = Vec::new();
    let mut columns = Vec::new();
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        props.push(PropertyDef {
            name: name.to_string(),
            ty: PropertyType::Scalar(ScalarType::F32),
        });
        columns.push(Column::Scalar(mesh.vertices().iter().map(|v| v[axis]).collect()));
    }
    for (name, values) in mesh.attributes() {
        let ty = if is_color_channel(name) {
            ScalarType::U8
        } else {
            ScalarType::F32
        };
        props.push(PropertyDef {
            name: name.clone(),
            ty: PropertyType::Scalar(ty),
        });
        let vals = if ty == ScalarType::U8 {
            values.iter().map(|v| v.round().clamp(0.0, 255.0)).collect()
        } else {
            values.clone()
        };
        columns.push(Column::Scalar(vals));
    }
    let vertex = ElementData {
        def: ElementDef {
            name: "vertex".into(),
            count: n,
            properties: props,
        },
        columns,
    };
    let face = ElementData {
        def: ElementDef {
            name: "face".into(),
            count: mesh.face_count(),
            properties: vec![PropertyDef {
                name: "vertex_indices".into(),
                ty: PropertyType::List {
                    count: ScalarType::U8,
                    item: ScalarType::I32,
                },
            }],
        },
        columns: vec![Column::List(
            mesh.faces()
                .iter()
                .map(|f| f.iter().map(|v| *v as f64).collect())
                .collect(),
        )],
    };
    write_ply(w, encoding, &[], &[vertex, face])?;
    Ok(())
}

//! Minimal PLY reader and writer.
//!
//! Supports `ascii 1.0` and `binary_little_endian 1.0` bodies with any number
//! of elements made of scalar and list properties. Data is decoded into `f64`
//! columns, which is exact for every PLY scalar type except 64-bit integers
//! (not part of the format). Big-endian bodies are rejected.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("truncated PLY body: {0}")]
    TruncatedBody(String),
    #[error("malformed PLY body: {0}")]
    MalformedBody(String),
    #[error("unsupported PLY encoding: {0}")]
    UnsupportedEncoding(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => LittleEndian::read_i16(b) as f64,
            ScalarType::U16 => LittleEndian::read_u16(b) as f64,
            ScalarType::I32 => LittleEndian::read_i32(b) as f64,
            ScalarType::U32 => LittleEndian::read_u32(b) as f64,
            ScalarType::F32 => LittleEndian::read_f32(b) as f64,
            ScalarType::F64 => LittleEndian::read_f64(b),
        }
    }

    fn encode(self, v: f64, out: &mut impl Write) -> io::Result<()> {
        match self {
            ScalarType::I8 => out.write_i8(v as i8),
            ScalarType::U8 => out.write_u8(v as u8),
            ScalarType::I16 => out.write_i16::<LittleEndian>(v as i16),
            ScalarType::U16 => out.write_u16::<LittleEndian>(v as u16),
            ScalarType::I32 => out.write_i32::<LittleEndian>(v as i32),
            ScalarType::U32 => out.write_u32::<LittleEndian>(v as u32),
            ScalarType::F32 => out.write_f32::<LittleEndian>(v as f32),
            ScalarType::F64 => out.write_f64::<LittleEndian>(v),
        }
    }

    fn format_ascii(self, v: f64) -> String {
        match self {
            ScalarType::F32 => format!("{}", v as f32),
            ScalarType::F64 => format!("{v}"),
            ScalarType::I8 => format!("{}", v as i8),
            ScalarType::U8 => format!("{}", v as u8),
            ScalarType::I16 => format!("{}", v as i16),
            ScalarType::U16 => format!("{}", v as u16),
            ScalarType::I32 => format!("{}", v as i32),
            ScalarType::U32 => format!("{}", v as u32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyType {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDef {
    pub name: String,
    pub ty: PropertyType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDef {
    pub name: String,
    pub count: usize,
    pub properties: Vec<PropertyDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyHeader {
    pub encoding: PlyEncoding,
    pub elements: Vec<ElementDef>,
    pub comments: Vec<String>,
}

/// Decoded values of one property across all records of an element.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
    /// Not retained (filtered out by the caller).
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementData {
    pub def: ElementDef,
    pub columns: Vec<Column>,
}

impl ElementData {
    pub fn column(&self, name: &str) -> Option<&Column> {
        let i = self.def.properties.iter().position(|p| p.name == name)?;
        Some(&self.columns[i])
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Column::Scalar(v) => Some(v),
            _ => None,
        }
    }

    pub fn list(&self, name: &str) -> Option<&[Vec<f64>]> {
        match self.column(name)? {
            Column::List(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub header: PlyHeader,
    pub elements: Vec<ElementData>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&ElementData> {
        self.elements.iter().find(|e| e.def.name == name)
    }
}

fn header_line(r: &mut impl BufRead) -> Result<String, PlyError> {
    let mut buf = Vec::new();
    let n = r.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(PlyError::MalformedHeader("missing end_header".into()));
    }
    let s = String::from_utf8(buf).map_err(|_| PlyError::MalformedHeader("non-UTF-8 header".into()))?;
    Ok(s.trim_end_matches(['\n', '\r']).to_string())
}

/// Parses the header, leaving `r` positioned at the first body byte.
pub fn read_header(r: &mut impl BufRead) -> Result<PlyHeader, PlyError> {
    let magic = header_line(r)?;
    if magic.trim() != "ply" {
        return Err(PlyError::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let mut encoding = None;
    let mut elements: Vec<ElementDef> = Vec::new();
    let mut comments = Vec::new();
    loop {
        let line = header_line(r)?;
        let mut toks = line.split_whitespace();
        let Some(kw) = toks.next() else { continue };
        match kw {
            "format" => {
                let fmt = toks.next().unwrap_or("");
                encoding = Some(match fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => return Err(PlyError::UnsupportedEncoding(fmt.into())),
                    other => return Err(PlyError::MalformedHeader(format!("unknown format {other:?}"))),
                });
            }
            "comment" | "obj_info" => {
                comments.push(line.split_once(' ').map(|x| x.1).unwrap_or("").to_string());
            }
            "element" => {
                let name = toks
                    .next()
                    .ok_or_else(|| PlyError::MalformedHeader("element without name".into()))?;
                let count = toks
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| PlyError::MalformedHeader(format!("element {name} without count")))?;
                elements.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::MalformedHeader("property before element".into()))?;
                let bad = || PlyError::MalformedHeader(format!("bad property line {line:?}"));
                let t = toks.next().ok_or_else(bad)?;
                let ty = if t == "list" {
                    let count = toks.next().and_then(ScalarType::parse).ok_or_else(bad)?;
                    let item = toks.next().and_then(ScalarType::parse).ok_or_else(bad)?;
                    if count.is_float() {
                        return Err(bad());
                    }
                    PropertyType::List { count, item }
                } else {
                    PropertyType::Scalar(ScalarType::parse(t).ok_or_else(bad)?)
                };
                let name = toks.next().ok_or_else(bad)?;
                el.properties.push(PropertyDef {
                    name: name.to_string(),
                    ty,
                });
            }
            "end_header" => break,
            other => return Err(PlyError::MalformedHeader(format!("unknown keyword {other:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| PlyError::MalformedHeader("missing format line".into()))?;
    Ok(PlyHeader {
        encoding,
        elements,
        comments,
    })
}

fn new_columns(def: &ElementDef, keep: &dyn Fn(&str, &str) -> bool) -> Vec<Column> {
    def.properties
        .iter()
        .map(|p| {
            if !keep(&def.name, &p.name) {
                Column::Skipped
            } else {
                match p.ty {
                    PropertyType::Scalar(_) => Column::Scalar(Vec::with_capacity(def.count)),
                    PropertyType::List { .. } => Column::List(Vec::with_capacity(def.count)),
                }
            }
        })
        .collect()
}

struct BinCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BinCursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PlyError> {
        if self.pos + n > self.data.len() {
            return Err(PlyError::TruncatedBody(format!("ran out of data reading {what}")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn read_binary_body(
    body: &[u8],
    header: &PlyHeader,
    keep: &dyn Fn(&str, &str) -> bool,
) -> Result<Vec<ElementData>, PlyError> {
    let mut cur = BinCursor { data: body, pos: 0 };
    let mut out = Vec::with_capacity(header.elements.len());
    for def in &header.elements {
        let mut columns = new_columns(def, keep);
        // Fast path: fixed-size records.
        let fixed: Option<Vec<ScalarType>> = def
            .properties
            .iter()
            .map(|p| match p.ty {
                PropertyType::Scalar(t) => Some(t),
                PropertyType::List { .. } => None,
            })
            .collect();
        if let Some(types) = fixed {
            let stride: usize = types.iter().map(|t| t.size()).sum();
            let bytes = cur.take(stride * def.count, &def.name)?;
            for rec in bytes.chunks_exact(stride.max(1)).take(def.count) {
                let mut off = 0;
                for (t, col) in types.iter().zip(columns.iter_mut()) {
                    if let Column::Scalar(v) = col {
                        v.push(t.decode(&rec[off..off + t.size()]));
                    }
                    off += t.size();
                }
            }
        } else {
            for _ in 0..def.count {
                for (p, col) in def.properties.iter().zip(columns.iter_mut()) {
                    match p.ty {
                        PropertyType::Scalar(t) => {
                            let v = t.decode(cur.take(t.size(), &p.name)?);
                            if let Column::Scalar(c) = col {
                                c.push(v);
                            }
                        }
                        PropertyType::List { count, item } => {
                            let n = count.decode(cur.take(count.size(), &p.name)?);
                            if n < 0.0 {
                                return Err(PlyError::MalformedBody(format!("negative list length in {}", p.name)));
                            }
                            let bytes = cur.take(n as usize * item.size(), &p.name)?;
                            if let Column::List(c) = col {
                                c.push(bytes.chunks_exact(item.size()).map(|b| item.decode(b)).collect());
                            }
                        }
                    }
                }
            }
        }
        out.push(ElementData {
            def: def.clone(),
            columns,
        });
    }
    Ok(out)
}

fn read_ascii_body(
    body: &str,
    header: &PlyHeader,
    keep: &dyn Fn(&str, &str) -> bool,
) -> Result<Vec<ElementData>, PlyError> {
    let mut toks = body.split_ascii_whitespace();
    let mut next = |what: &str| -> Result<f64, PlyError> {
        let t = toks
            .next()
            .ok_or_else(|| PlyError::TruncatedBody(format!("ran out of values reading {what}")))?;
        t.parse::<f64>()
            .map_err(|_| PlyError::MalformedBody(format!("bad value {t:?} for {what}")))
    };
    let mut out = Vec::with_capacity(header.elements.len());
    for def in &header.elements {
        let mut columns = new_columns(def, keep);
        for _ in 0..def.count {
            for (p, col) in def.properties.iter().zip(columns.iter_mut()) {
                match p.ty {
                    PropertyType::Scalar(_) => {
                        let v = next(&p.name)?;
                        if let Column::Scalar(c) = col {
                            c.push(v);
                        }
                    }
                    PropertyType::List { .. } => {
                        let n = next(&p.name)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(PlyError::MalformedBody(format!("bad list length {n} in {}", p.name)));
                        }
                        let items = (0..n as usize).map(|_| next(&p.name)).collect::<Result<Vec<_>, _>>()?;
                        if let Column::List(c) = col {
                            c.push(items);
                        }
                    }
                }
            }
        }
        out.push(ElementData {
            def: def.clone(),
            columns,
        });
    }
    Ok(out)
}

/// Reads a whole PLY stream. `keep(element, property)` selects which
/// properties are decoded into columns; the rest are parsed and dropped.
pub fn read_ply(
    mut r: impl BufRead,
    keep: impl Fn(&str, &str) -> bool,
) -> Result<PlyData, PlyError> {
    let header = read_header(&mut r)?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let elements = match header.encoding {
        PlyEncoding::BinaryLittleEndian => read_binary_body(&body, &header, &keep)?,
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(&body)
                .map_err(|_| PlyError::MalformedBody("ascii body is not UTF-8".into()))?;
            read_ascii_body(text, &header, &keep)?
        }
    };
    Ok(PlyData { header, elements })
}

pub fn read_ply_file(
    path: impl AsRef<Path>,
    keep: impl Fn(&str, &str) -> bool,
) -> Result<PlyData, PlyError> {
    read_ply(BufReader::new(File::open(path)?), keep)
}

/// Writes elements in the given encoding. Every element's columns must be
/// fully populated (no `Skipped`) and match its declared count.
pub fn write_ply(
    w: impl Write,
    encoding: PlyEncoding,
    comments: &[String],
    elements: &[ElementData],
) -> Result<(), PlyError> {
    let mut w = BufWriter::new(w);
    writeln!(w, "ply")?;
    match encoding {
        PlyEncoding::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyEncoding::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    for el in elements {
        writeln!(w, "element {} {}", el.def.name, el.def.count)?;
        for p in &el.def.properties {
            match p.ty {
                PropertyType::Scalar(t) => writeln!(w, "property {} {}", t.name(), p.name)?,
                PropertyType::List { count, item } => {
                    writeln!(w, "property list {} {} {}", count.name(), item.name(), p.name)?
                }
            }
        }
        for c in &el.columns {
            let len = match c {
                Column::Scalar(v) => v.len(),
                Column::List(v) => v.len(),
                Column::Skipped => {
                    return Err(PlyError::MalformedBody(format!("element {} has a skipped column", el.def.name)))
                }
            };
            if len != el.def.count {
                return Err(PlyError::MalformedBody(format!(
                    "element {} column has {len} values, expected {}",
                    el.def.name, el.def.count
                )));
            }
        }
    }
    writeln!(w, "end_header")?;
    for el in elements {
        for i in 0..el.def.count {
            let mut first = true;
            for (p, c) in el.def.properties.iter().zip(&el.columns) {
                match (encoding, p.ty, c) {
                    (PlyEncoding::BinaryLittleEndian, PropertyType::Scalar(t), Column::Scalar(v)) => {
                        t.encode(v[i], &mut w)?
                    }
                    (PlyEncoding::BinaryLittleEndian, PropertyType::List { count, item }, Column::List(v)) => {
                        count.encode(v[i].len() as f64, &mut w)?;
                        for x in &v[i] {
                            item.encode(*x, &mut w)?;
                        }
                    }
                    (PlyEncoding::Ascii, PropertyType::Scalar(t), Column::Scalar(v)) => {
                        if !first {
                            write!(w, " ")?;
                        }
                        write!(w, "{}", t.format_ascii(v[i]))?;
                    }
                    (PlyEncoding::Ascii, PropertyType::List { item, .. }, Column::List(v)) => {
                        if !first {
                            write!(w, " ")?;
                        }
                        write!(w, "{}", v[i].len())?;
                        for x in &v[i] {
                            write!(w, " {}", item.format_ascii(*x))?;
                        }
                    }
                    _ => {
                        return Err(PlyError::MalformedBody(format!(
                            "column type does not match property {}",
                            p.name
                        )))
                    }
                }
                first = false;
            }
            if encoding == PlyEncoding::Ascii {
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ElementData> {
        vec![
            ElementData {
                def: ElementDef {
                    name: "vertex".into(),
                    count: 3,
                    properties: vec![
                        PropertyDef { name: "x".into(), ty: PropertyType::Scalar(ScalarType::F32) },
                        PropertyDef { name: "q".into(), ty: PropertyType::Scalar(ScalarType::U8) },
                    ],
                },
                columns: vec![Column::Scalar(vec![0.5, -1.25, 3.0]), Column::Scalar(vec![0.0, 7.0, 255.0])],
            },
            ElementData {
                def: ElementDef {
                    name: "face".into(),
                    count: 2,
                    properties: vec![PropertyDef {
                        name: "vertex_indices".into(),
                        ty: PropertyType::List { count: ScalarType::U8, item: ScalarType::I32 },
                    }],
                },
                columns: vec![Column::List(vec![vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.0, 1.0]])],
            },
        ]
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply(&mut buf, enc, &["hello".into()], &sample()).unwrap();
            let data = read_ply(&buf[..], |_, _| true).unwrap();
            assert_eq!(data.header.encoding, enc);
            assert_eq!(data.header.comments, vec!["hello".to_string()]);
            assert_eq!(data.elements, sample());
        }
    }

    #[test]
    fn big_endian_rejected() {
        let src = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(read_ply(&src[..], |_, _| true), Err(PlyError::UnsupportedEncoding(_))));
    }

    #[test]
    fn truncated_binary_body() {
        let mut buf = Vec::new();
        write_ply(&mut buf, PlyEncoding::BinaryLittleEndian, &[], &sample()).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_ply(&buf[..], |_, _| true), Err(PlyError::TruncatedBody(_))));
    }

    #[test]
    fn malformed_header_variants() {
        for src in [
            &b"plx\n"[..],
            b"ply\nelement vertex 1\nproperty float x\nend_header\n",
            b"ply\nformat ascii 1.0\nproperty float x\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\n",
        ] {
            assert!(matches!(read_ply(src, |_, _| true), Err(PlyError::MalformedHeader(_))), "{:?}", String::from_utf8_lossy(src));
        }
    }

    #[test]
    fn filter_skips_columns() {
        let mut buf = Vec::new();
        write_ply(&mut buf, PlyEncoding::BinaryLittleEndian, &[], &sample()).unwrap();
        let data = read_ply(&buf[..], |el, p| el == "vertex" && p == "q").unwrap();
        let v = data.element("vertex").unwrap();
        assert_eq!(v.column("x"), Some(&Column::Skipped));
        assert_eq!(v.scalar("q"), Some(&[0.0, 7.0, 255.0][..]));
        assert_eq!(data.element("face").unwrap().columns[0], Column::Skipped);
    }
}

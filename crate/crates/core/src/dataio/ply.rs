//! PLY 1.0 point clouds, `ascii` and `binary_little_endian`.
//!
//! Only the `vertex` element's `x`, `y`, `z` are kept. Other properties and
//! elements are skipped, including list properties.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::geometry::{PointCloud, Vec3};

use super::{read_file, write_file, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: u64,
    props: Vec<Property>,
}

impl Element {
    fn fixed_stride(&self) -> Option<usize> {
        self.props
            .iter()
            .map(|p| match p {
                Property::Scalar(s, _) => Some(s.size()),
                Property::List(..) => None,
            })
            .sum()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.props
            .iter()
            .position(|p| matches!(p, Property::Scalar(_, n) if n == name))
    }
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body_start: usize,
    /// Number of header lines, for ascii line numbering.
    lines: usize,
}

fn header_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::PlyHeader {
        line,
        msg: msg.into(),
    }
}

fn parse_header(data: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &data[pos..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(header_err(
                line_no + 1,
                "header not terminated by end_header",
            ));
        };
        line_no += 1;
        let raw = &rest[..nl];
        pos += nl + 1;
        let text = std::str::from_utf8(raw)
            .map_err(|_| header_err(line_no, "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let words: Vec<&str> = text.split_whitespace().collect();
        if line_no == 1 {
            if text.trim() != "ply" {
                return Err(header_err(1, "missing `ply` magic"));
            }
            continue;
        }
        match words.as_slice() {
            ["format", "ascii", "1.0"] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", "1.0"] => {
                format = Some(PlyFormat::BinaryLittleEndian)
            }
            ["format", other, ..] => {
                return Err(header_err(line_no, format!("unsupported format `{other}`")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse::<u64>()
                    .map_err(|_| header_err(line_no, format!("invalid element count `{count}`")))?;
                elements.push(Element {
                    name: (*name).to_owned(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count_ty, item_ty, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err(line_no, "property before any element"))?;
                let c = Scalar::parse(count_ty)
                    .ok_or_else(|| header_err(line_no, format!("unknown type `{count_ty}`")))?;
                let i = Scalar::parse(item_ty)
                    .ok_or_else(|| header_err(line_no, format!("unknown type `{item_ty}`")))?;
                el.props.push(Property::List(c, i));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err(line_no, "property before any element"))?;
                let s = Scalar::parse(ty)
                    .ok_or_else(|| header_err(line_no, format!("unknown type `{ty}`")))?;
                el.props.push(Property::Scalar(s, (*name).to_owned()));
            }
            ["end_header"] => break,
            _ => {
                return Err(header_err(
                    line_no,
                    format!("unrecognized header line `{text}`"),
                ))
            }
        }
    }
    let format = format.ok_or_else(|| header_err(line_no, "no format line"))?;
    Ok(Header {
        format,
        elements,
        body_start: pos,
        lines: line_no,
    })
}

/// A parsed cloud plus the number of non-finite vertices that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyRead {
    pub cloud: PointCloud,
    pub dropped_non_finite: usize,
}

struct VertexLayout {
    index: usize,
    xyz: [usize; 3],
}

fn vertex_layout(header: &Header) -> Result<VertexLayout> {
    let index = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| header_err(header.lines, "no `vertex` element"))?;
    let el = &header.elements[index];
    let find = |n: &'static str| {
        el.position(n)
            .ok_or_else(|| header_err(header.lines, format!("vertex element lacks property `{n}`")))
    };
    Ok(VertexLayout {
        index,
        xyz: [find("x")?, find("y")?, find("z")?],
    })
}

/// Parses a PLY file held in memory. Points are tagged as sensor frame.
pub fn read_ply_bytes(data: &[u8]) -> Result<PlyRead> {
    let header = parse_header(data)?;
    let layout = vertex_layout(&header)?;
    let body = &data[header.body_start..];
    let raw = match header.format {
        PlyFormat::Ascii => read_ascii(&header, &layout, body)?,
        PlyFormat::BinaryLittleEndian => read_binary(&header, &layout, body, header.body_start)?,
    };
    let total = raw.len();
    let points: Vec<Vec3> = raw
        .into_iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .collect();
    Ok(PlyRead {
        dropped_non_finite: total - points.len(),
        cloud: PointCloud::sensor(points),
    })
}

fn read_ascii(header: &Header, layout: &VertexLayout, body: &[u8]) -> Result<Vec<Vec3>> {
    let text = std::str::from_utf8(body).map_err(|e| DataError::Binary {
        offset: e.valid_up_to() as u64,
        msg: "ascii PLY body is not valid UTF-8".into(),
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.lines + i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut points = Vec::new();
    for (ei, el) in header.elements.iter().enumerate() {
        if ei > layout.index {
            break;
        }
        for row in 0..el.count {
            let Some((line, l)) = lines.next() else {
                return Err(DataError::Syntax {
                    line: header.lines + text.lines().count() + 1,
                    msg: format!("file ends after {row} of {} `{}` rows", el.count, el.name),
                });
            };
            if ei != layout.index {
                continue;
            }
            let tokens: Vec<&str> = l.split_whitespace().collect();
            let mut values = Vec::with_capacity(tokens.len());
            let mut t = 0usize;
            for prop in &el.props {
                let next = |t: &mut usize, ty: Scalar| -> Result<f64> {
                    let tok = tokens.get(*t).ok_or_else(|| DataError::Syntax {
                        line,
                        msg: "too few values in vertex row".into(),
                    })?;
                    *t += 1;
                    // float32 text must round to the same value a binary file would hold
                    let v = match ty {
                        Scalar::F32 => tok.parse::<f32>().map(f64::from),
                        _ => tok.parse::<f64>(),
                    };
                    v.map_err(|_| DataError::Syntax {
                        line,
                        msg: format!("invalid number `{tok}`"),
                    })
                };
                match prop {
                    Property::Scalar(ty, _) => values.push(next(&mut t, *ty)?),
                    Property::List(count_ty, item_ty) => {
                        let n = next(&mut t, *count_ty)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(DataError::Syntax {
                                line,
                                msg: format!("invalid list length {n}"),
                            });
                        }
                        for _ in 0..n as usize {
                            next(&mut t, *item_ty)?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if t != tokens.len() {
                return Err(DataError::Syntax {
                    line,
                    msg: format!("expected {t} values, found {}", tokens.len()),
                });
            }
            let [x, y, z] = layout.xyz.map(|i| values[i]);
            points.push(Vec3::new(x, y, z));
        }
    }
    Ok(points)
}

fn read_binary(
    header: &Header,
    layout: &VertexLayout,
    body: &[u8],
    base: usize,
) -> Result<Vec<Vec3>> {
    let mut pos = 0usize;
    let mut points = Vec::new();
    for (ei, el) in header.elements.iter().enumerate() {
        if ei > layout.index {
            break;
        }
        if let Some(stride) = el.fixed_stride() {
            let need = (el.count as u128) * stride as u128;
            let available = (body.len() - pos) as u128;
            if need > available {
                return Err(DataError::Truncated {
                    what: "binary PLY payload",
                    expected: (base as u128 + pos as u128 + need).min(u64::MAX as u128) as u64,
                    actual: (base + body.len()) as u64,
                });
            }
        }
        let is_vertex = ei == layout.index;
        if is_vertex {
            points.reserve(el.count.min(body.len() as u64) as usize);
        }
        for _ in 0..el.count {
            let mut values = [0.0f64; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(s, _) => {
                        let end = pos + s.size();
                        if end > body.len() {
                            return Err(DataError::Truncated {
                                what: "binary PLY payload",
                                expected: (base + end) as u64,
                                actual: (base + body.len()) as u64,
                            });
                        }
                        if is_vertex {
                            if let Some(axis) = layout.xyz.iter().position(|&i| i == pi) {
                                values[axis] = s.decode(&body[pos..end]);
                            }
                        }
                        pos = end;
                    }
                    Property::List(count_ty, item_ty) => {
                        let end = pos + count_ty.size();
                        if end > body.len() {
                            return Err(DataError::Truncated {
                                what: "binary PLY payload",
                                expected: (base + end) as u64,
                                actual: (base + body.len()) as u64,
                            });
                        }
                        let n = count_ty.decode(&body[pos..end]);
                        if !(n >= 0.0) {
                            return Err(DataError::Binary {
                                offset: (base + pos) as u64,
                                msg: format!("negative list length {n}"),
                            });
                        }
                        let skip = n as usize * item_ty.size();
                        pos = end;
                        if body.len() - pos < skip {
                            return Err(DataError::Truncated {
                                what: "binary PLY payload",
                                expected: (base + pos + skip) as u64,
                                actual: (base + body.len()) as u64,
                            });
                        }
                        pos += skip;
                    }
                }
            }
            if is_vertex {
                points.push(Vec3::new(values[0], values[1], values[2]));
            }
        }
    }
    Ok(points)
}

/// Reads a PLY cloud from disk; non-finite vertices are dropped with a warning.
pub fn parse_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let read = read_ply_bytes(&read_file(path)?)?;
    if read.dropped_non_finite > 0 {
        warn!(
            "{}: dropped {} non-finite vertices",
            path.display(),
            read.dropped_non_finite
        );
    }
    Ok(read.cloud)
}

/// Serializes points as float32 `x y z` vertices.
pub fn ply_bytes(points: &[Vec3], format: PlyFormat) -> Vec<u8> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )
    .into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut s = String::new();
            for p in points {
                let _ = writeln!(s, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
            }
            out.extend_from_slice(s.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            for p in points {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, points: &[Vec3], format: PlyFormat) -> Result<()> {
    write_file(path.as_ref(), &ply_bytes(points, format))
}

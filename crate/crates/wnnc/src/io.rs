//! Point-cloud file input/output.
//!
//! Two families are supported:
//!
//! * XYZ ASCII: one `x y z [nx ny nz]` line per point, `#` starts a comment.
//! * PLY (ASCII or binary little/big-endian on read, ASCII or binary
//!   little-endian on write): the `vertex` element must carry `float` or
//!   `double` properties `x y z`, optionally `nx ny nz`; all other
//!   properties and elements are skipped.
//!
//! Binary PLY is written as little-endian `double`s, so writing and
//! re-reading a cloud reproduces it bit-exactly.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use byteorder::{BigEndian, ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// On-disk cloud formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PlyAscii,
    PlyBinaryLittleEndian,
}

impl CloudFormat {
    /// Picks a format from a file extension (`.ply` defaults to binary).
    pub fn from_path(path: &Path) -> CloudFormat {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("ply") => CloudFormat::PlyBinaryLittleEndian,
            _ => CloudFormat::XyzAscii,
        }
    }
}

/// Parsed cloud: positions plus optional per-point normals.
#[derive(Debug, Clone)]
pub struct CloudData {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a cloud, dispatching on the extension: `.ply` is parsed per its
/// header (ASCII or either binary endianness), anything else as XYZ ASCII.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<CloudData> {
    let path = path.as_ref();
    let is_ply = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("ply"))
        .unwrap_or(false);
    if is_ply {
        read_ply(path)
    } else {
        read_xyz(path)
    }
}

/// Writes positions (and normals, when given) in the requested format.
pub fn write_cloud(
    path: impl AsRef<Path>,
    positions: &[Vec3],
    normals: Option<&[Vec3]>,
    format: CloudFormat,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(n) = normals {
        if n.len() != positions.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                actual: n.len(),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        CloudFormat::XyzAscii => write_xyz(&mut out, positions, normals),
        CloudFormat::PlyAscii => write_ply(&mut out, positions, normals, false),
        CloudFormat::PlyBinaryLittleEndian => write_ply(&mut out, positions, normals, true),
    }
}

fn write_xyz(out: &mut impl Write, positions: &[Vec3], normals: Option<&[Vec3]>) -> Result<()> {
    for (i, p) in positions.iter().enumerate() {
        match normals {
            Some(n) => {
                let m = n[i];
                writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, m.x, m.y, m.z)?
            }
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

fn write_ply(
    out: &mut impl Write,
    positions: &[Vec3],
    normals: Option<&[Vec3]>,
    binary: bool,
) -> Result<()> {
    writeln!(out, "ply")?;
    if binary {
        writeln!(out, "format binary_little_endian 1.0")?;
    } else {
        writeln!(out, "format ascii 1.0")?;
    }
    writeln!(out, "element vertex {}", positions.len())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    if normals.is_some() {
        writeln!(out, "property double nx")?;
        writeln!(out, "property double ny")?;
        writeln!(out, "property double nz")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in positions.iter().enumerate() {
        let values: &[f64] = match normals {
            Some(n) => &[p.x, p.y, p.z, n[i].x, n[i].y, n[i].z],
            None => &[p.x, p.y, p.z],
        };
        if binary {
            for v in values {
                out.write_f64::<LittleEndian>(*v)?;
            }
        } else {
            let joined = values
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(out, "{joined}")?;
        }
    }
    Ok(())
}

fn read_xyz(path: &Path) -> Result<CloudData> {
    let reader = BufReader::new(File::open(path)?);
    let mut positions = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut has_normals: Option<bool> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = [0.0f64; 6];
        let mut count = 0usize;
        for token in body.split_whitespace() {
            if count == 6 {
                return Err(parse_err(
                    path,
                    line_no,
                    "expected 3 or 6 numeric columns, got more",
                ));
            }
            fields[count] = token.parse::<f64>().map_err(|_| {
                parse_err(path, line_no, format!("invalid number '{token}'"))
            })?;
            count += 1;
        }
        let line_has_normals = match count {
            3 => false,
            6 => true,
            _ => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected 3 or 6 numeric columns, got {count}"),
                ))
            }
        };
        if !fields[..count].iter().all(|v| v.is_finite()) {
            return Err(parse_err(path, line_no, "non-finite coordinate"));
        }
        match has_normals {
            None => has_normals = Some(line_has_normals),
            Some(expected) if expected != line_has_normals => {
                return Err(parse_err(path, line_no, "inconsistent column count"));
            }
            _ => {}
        }
        positions.push(Vec3::new(fields[0], fields[1], fields[2]));
        if line_has_normals {
            normals.push(Vec3::new(fields[3], fields[4], fields[5]));
        }
    }
    if positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(CloudData {
        positions,
        normals: if has_normals == Some(true) {
            Some(normals)
        } else {
            None
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(token: &str) -> Option<PlyScalar> {
        Some(match token {
            "char" | "int8" => PlyScalar::I8,
            "uchar" | "uint8" => PlyScalar::U8,
            "short" | "int16" => PlyScalar::I16,
            "ushort" | "uint16" => PlyScalar::U16,
            "int" | "int32" => PlyScalar::I32,
            "uint" | "uint32" => PlyScalar::U32,
            "float" | "float32" => PlyScalar::F32,
            "double" | "float64" => PlyScalar::F64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar { ty: PlyScalar, name: String },
    List { count_ty: PlyScalar, item_ty: PlyScalar },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyEncoding {
    Ascii,
    BinaryLittle,
    BinaryBig,
}

struct PlyHeader {
    encoding: PlyEncoding,
    elements: Vec<PlyElement>,
    header_lines: usize,
}

fn read_header_line(reader: &mut impl BufRead) -> std::io::Result<String> {
    let mut bytes = Vec::new();
    reader.read_until(b'\n', &mut bytes)?;
    let mut s = String::from_utf8_lossy(&bytes).into_owned();
    while s.ends_with('\n') || s.ends_with('\r') {
        s.pop();
    }
    Ok(s)
}

fn parse_ply_header(path: &Path, reader: &mut impl BufRead) -> Result<PlyHeader> {
    let mut line_no = 1usize;
    let magic = read_header_line(reader)?;
    if magic.trim() != "ply" {
        return Err(parse_err(path, line_no, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        line_no += 1;
        let line = read_header_line(reader)?;
        if line.is_empty() && encoding.is_none() && elements.is_empty() {
            return Err(parse_err(path, line_no, "unexpected end of header"));
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => continue,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                encoding = Some(match tokens.next() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLittle,
                    Some("binary_big_endian") => PlyEncoding::BinaryBig,
                    other => {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("unsupported format '{}'", other.unwrap_or("")),
                        ))
                    }
                });
            }
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, line_no, "element without a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(path, line_no, "element without a count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before any element"))?;
                let kind = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, line_no, "property without a type"))?;
                if kind == "list" {
                    let count_ty = tokens.next().and_then(PlyScalar::parse).ok_or_else(|| {
                        parse_err(path, line_no, "list property with unknown count type")
                    })?;
                    let item_ty = tokens.next().and_then(PlyScalar::parse).ok_or_else(|| {
                        parse_err(path, line_no, "list property with unknown item type")
                    })?;
                    tokens
                        .next()
                        .ok_or_else(|| parse_err(path, line_no, "list property without a name"))?;
                    element
                        .properties
                        .push(PlyProperty::List { count_ty, item_ty });
                } else {
                    let ty = PlyScalar::parse(kind).ok_or_else(|| {
                        parse_err(path, line_no, format!("unknown property type '{kind}'"))
                    })?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(path, line_no, "property without a name"))?;
                    element.properties.push(PlyProperty::Scalar {
                        ty,
                        name: name.to_string(),
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unexpected header keyword '{other}'"),
                ));
            }
        }
    }
    let encoding =
        encoding.ok_or_else(|| parse_err(path, line_no, "header missing a format line"))?;
    Ok(PlyHeader {
        encoding,
        elements,
        header_lines: line_no,
    })
}

/// Column layout of the vertex element: indices of x, y, z and optionally
/// nx, ny, nz among its scalar values.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(path: &Path, element: &PlyElement) -> Result<VertexLayout> {
    let mut x = None;
    let mut y = None;
    let mut z = None;
    let mut nx = None;
    let mut ny = None;
    let mut nz = None;
    for (idx, prop) in element.properties.iter().enumerate() {
        if let PlyProperty::Scalar { ty, name } = prop {
            let slot = match name.as_str() {
                "x" => Some(&mut x),
                "y" => Some(&mut y),
                "z" => Some(&mut z),
                "nx" => Some(&mut nx),
                "ny" => Some(&mut ny),
                "nz" => Some(&mut nz),
                _ => None,
            };
            if let Some(slot) = slot {
                if !matches!(ty, PlyScalar::F32 | PlyScalar::F64) {
                    return Err(parse_err(
                        path,
                        0,
                        format!("vertex property '{name}' must be float or double"),
                    ));
                }
                *slot = Some(idx);
            }
        }
    }
    let (x, y, z) = match (x, y, z) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(parse_err(
                path,
                0,
                "vertex element lacks float x, y, z properties",
            ))
        }
    };
    let normal = match (nx, ny, nz) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => {
            return Err(parse_err(
                path,
                0,
                "vertex element has an incomplete nx, ny, nz triple",
            ))
        }
    };
    Ok(VertexLayout {
        xyz: [x, y, z],
        normal,
    })
}

fn read_ply(path: &Path) -> Result<CloudData> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = parse_ply_header(path, &mut reader)?;
    let vertex_index = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, 0, "no vertex element"))?;
    let layout = vertex_layout(path, &header.elements[vertex_index])?;
    let vertex_count = header.elements[vertex_index].count;
    if vertex_count == 0 {
        return Err(Error::EmptyCloud);
    }

    let mut positions = Vec::with_capacity(vertex_count);
    let mut normals = layout.normal.map(|_| Vec::with_capacity(vertex_count));

    match header.encoding {
        PlyEncoding::Ascii => read_ply_ascii_body(
            path,
            &mut reader,
            &header,
            vertex_index,
            &layout,
            &mut positions,
            &mut normals,
        )?,
        PlyEncoding::BinaryLittle => read_ply_binary_body::<LittleEndian>(
            path,
            &mut reader,
            &header,
            vertex_index,
            &layout,
            &mut positions,
            &mut normals,
        )?,
        PlyEncoding::BinaryBig => read_ply_binary_body::<BigEndian>(
            path,
            &mut reader,
            &header,
            vertex_index,
            &layout,
            &mut positions,
            &mut normals,
        )?,
    }

    for (i, p) in positions.iter().enumerate() {
        if !p.is_finite() {
            return Err(parse_err(path, 0, format!("non-finite vertex {i}")));
        }
    }
    Ok(CloudData { positions, normals })
}

#[allow(clippy::too_many_arguments)]
fn read_ply_ascii_body(
    path: &Path,
    reader: &mut impl BufRead,
    header: &PlyHeader,
    vertex_index: usize,
    layout: &VertexLayout,
    positions: &mut Vec<Vec3>,
    normals: &mut Option<Vec<Vec3>>,
) -> Result<()> {
    let mut line_no = header.header_lines;
    for (eidx, element) in header.elements.iter().enumerate() {
        for _ in 0..element.count {
            line_no += 1;
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unexpected end of file inside element '{}'", element.name),
                ));
            }
            if eidx != vertex_index {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let mut scalars = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { .. } => {
                        let token = tokens.next().ok_or_else(|| {
                            parse_err(path, line_no, "too few values on vertex line")
                        })?;
                        let value: f64 = token.parse().map_err(|_| {
                            parse_err(path, line_no, format!("invalid number '{token}'"))
                        })?;
                        scalars.push(value);
                    }
                    PlyProperty::List { .. } => {
                        // lists on the vertex element carry no geometry; skip
                        let count_token = tokens.next().ok_or_else(|| {
                            parse_err(path, line_no, "missing list count")
                        })?;
                        let count: usize = count_token.parse().map_err(|_| {
                            parse_err(path, line_no, "invalid list count")
                        })?;
                        for _ in 0..count {
                            tokens.next().ok_or_else(|| {
                                parse_err(path, line_no, "truncated list property")
                            })?;
                        }
                        scalars.push(0.0);
                    }
                }
            }
            push_vertex(layout, &scalars, positions, normals);
        }
    }
    if positions.len() != header.elements[vertex_index].count {
        return Err(parse_err(path, line_no, "vertex count mismatch"));
    }
    Ok(())
}

fn read_scalar<E: ByteOrder>(reader: &mut impl Read, ty: PlyScalar) -> std::io::Result<f64> {
    Ok(match ty {
        PlyScalar::I8 => f64::from(reader.read_i8()?),
        PlyScalar::U8 => f64::from(reader.read_u8()?),
        PlyScalar::I16 => f64::from(reader.read_i16::<E>()?),
        PlyScalar::U16 => f64::from(reader.read_u16::<E>()?),
        PlyScalar::I32 => f64::from(reader.read_i32::<E>()?),
        PlyScalar::U32 => f64::from(reader.read_u32::<E>()?),
        PlyScalar::F32 => f64::from(reader.read_f32::<E>()?),
        PlyScalar::F64 => reader.read_f64::<E>()?,
    })
}

#[allow(clippy::too_many_arguments)]
fn read_ply_binary_body<E: ByteOrder>(
    path: &Path,
    reader: &mut impl Read,
    header: &PlyHeader,
    vertex_index: usize,
    layout: &VertexLayout,
    positions: &mut Vec<Vec3>,
    normals: &mut Option<Vec<Vec3>>,
) -> Result<()> {
    let eof = |element: &str, instance: usize| {
        parse_err(
            path,
            0,
            format!("unexpected end of file in element '{element}' instance {instance}"),
        )
    };
    for (eidx, element) in header.elements.iter().enumerate() {
        for instance in 0..element.count {
            let mut scalars = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    PlyProperty::Scalar { ty, .. } => {
                        let v = read_scalar::<E>(reader, *ty)
                            .map_err(|_| eof(&element.name, instance))?;
                        scalars.push(v);
                    }
                    PlyProperty::List { count_ty, item_ty } => {
                        let count = read_scalar::<E>(reader, *count_ty)
                            .map_err(|_| eof(&element.name, instance))?
                            as usize;
                        for _ in 0..count {
                            read_scalar::<E>(reader, *item_ty)
                                .map_err(|_| eof(&element.name, instance))?;
                        }
                        scalars.push(0.0);
                    }
                }
            }
            if eidx == vertex_index {
                push_vertex(layout, &scalars, positions, normals);
            }
        }
        if eidx == vertex_index {
            // later elements cannot affect the cloud; stop reading
            break;
        }
    }
    Ok(())
}

fn push_vertex(
    layout: &VertexLayout,
    scalars: &[f64],
    positions: &mut Vec<Vec3>,
    normals: &mut Option<Vec<Vec3>>,
) {
    positions.push(Vec3::new(
        scalars[layout.xyz[0]],
        scalars[layout.xyz[1]],
        scalars[layout.xyz[2]],
    ));
    if let (Some(normals), Some(idx)) = (normals.as_mut(), layout.normal) {
        normals.push(Vec3::new(scalars[idx[0]], scalars[idx[1]], scalars[idx[2]]));
    }
}

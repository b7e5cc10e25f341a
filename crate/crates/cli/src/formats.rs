//! PLY (ASCII and binary little-endian), XYZ text and OBJ meshes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use selfsample_core::eval::TriangleMesh;
use selfsample_core::{PointCloud, Vec3};

use crate::error::{CliError, CliResult};

pub type Rgb = [u8; 3];

pub const POSITIVE_COLOR: Rgb = [220, 30, 30];
pub const NEGATIVE_COLOR: Rgb = [30, 60, 220];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    PlyAscii,
    PlyBinary,
    Xyz,
}

impl PointFormat {
    /// `.ply` defaults to binary; `.xyz`, `.txt` and `.pts` are XYZ text.
    pub fn from_path(path: &Path) -> CliResult<Self> {
        match extension(path).as_deref() {
            Some("ply") => Ok(PointFormat::PlyBinary),
            Some("xyz" | "txt" | "pts") => Ok(PointFormat::Xyz),
            _ => Err(CliError::Usage(format!(
                "{}: unknown point cloud extension (expected .ply or .xyz)",
                path.display()
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Everything a point file can carry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointData {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub colors: Option<Vec<Rgb>>,
    /// Triangles, when the PLY has a face element.
    pub faces: Vec<[usize; 3]>,
}

impl PointData {
    pub fn into_cloud(self) -> CliResult<PointCloud> {
        let cloud = PointCloud::new(self.points)?;
        match self.normals {
            // Normals that are not unit length are dropped rather than rejected.
            Some(n) => Ok(cloud.clone().set_normals(n).unwrap_or(cloud)),
            None => Ok(cloud),
        }
    }
}

pub fn read_point_cloud(path: &Path) -> CliResult<PointCloud> {
    read_point_data(path)?.into_cloud()
}

pub fn read_point_data(path: &Path) -> CliResult<PointData> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    match extension(path).as_deref() {
        Some("ply") => parse_ply(path, &bytes),
        Some("xyz" | "txt" | "pts") => parse_xyz(path, &bytes),
        _ => Err(CliError::Usage(format!(
            "{}: unknown point cloud extension (expected .ply or .xyz)",
            path.display()
        ))),
    }
}

/// Writes points, normals if the cloud has them, and optional per-point colors.
/// An empty color slice writes plain geometry.
pub fn write_point_cloud(
    cloud: &PointCloud,
    path: &Path,
    format: PointFormat,
    colors: Option<&[Rgb]>,
) -> CliResult<()> {
    write_points(cloud.points(), cloud.normals(), path, format, colors)
}

pub fn write_points(
    points: &[Vec3],
    normals: Option<&[Vec3]>,
    path: &Path,
    format: PointFormat,
    colors: Option<&[Rgb]>,
) -> CliResult<()> {
    let colors = colors.filter(|c| !c.is_empty());
    if let Some(c) = colors {
        if c.len() != points.len() {
            return Err(CliError::Usage(format!(
                "{} colors for {} points",
                c.len(),
                points.len()
            )));
        }
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        PointFormat::Xyz => write_xyz(&mut w, points, normals),
        PointFormat::PlyAscii | PointFormat::PlyBinary => {
            write_ply(&mut w, points, normals, colors, format)
        }
    };
    result
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn write_xyz(w: &mut impl Write, points: &[Vec3], normals: Option<&[Vec3]>) -> std::io::Result<()> {
    for (i, p) in points.iter().enumerate() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(n) = normals {
            write!(w, " {} {} {}", n[i].x, n[i].y, n[i].z)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_ply(
    w: &mut impl Write,
    points: &[Vec3],
    normals: Option<&[Vec3]>,
    colors: Option<&[Rgb]>,
    format: PointFormat,
) -> std::io::Result<()> {
    let binary = format == PointFormat::PlyBinary;
    writeln!(w, "ply")?;
    writeln!(
        w,
        "format {} 1.0",
        if binary {
            "binary_little_endian"
        } else {
            "ascii"
        }
    )?;
    writeln!(w, "element vertex {}", points.len())?;
    for c in ["x", "y", "z"] {
        writeln!(w, "property double {c}")?;
    }
    if normals.is_some() {
        for c in ["nx", "ny", "nz"] {
            writeln!(w, "property double {c}")?;
        }
    }
    if colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(w, "property uchar {c}")?;
        }
    }
    writeln!(w, "end_header")?;
    for (i, p) in points.iter().enumerate() {
        let mut values = vec![p.x, p.y, p.z];
        if let Some(n) = normals {
            values.extend([n[i].x, n[i].y, n[i].z]);
        }
        if binary {
            for v in &values {
                w.write_all(&v.to_le_bytes())?;
            }
            if let Some(c) = colors {
                w.write_all(&c[i])?;
            }
        } else {
            let text: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            write!(w, "{}", text.join(" "))?;
            if let Some(c) = colors {
                write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> CliResult<PointData> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CliError::parse(path, "byte 0", format!("not UTF-8: {e}")))?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns = None;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", line_no + 1);
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::parse(path, loc(), format!("bad number: {e}")))?;
        if values.len() != 3 && values.len() != 6 {
            return Err(CliError::parse(
                path,
                loc(),
                format!("expected 3 or 6 columns, got {}", values.len()),
            ));
        }
        if *columns.get_or_insert(values.len()) != values.len() {
            return Err(CliError::parse(path, loc(), "column count changes"));
        }
        points.push(Vec3::new(values[0], values[1], values[2]));
        if values.len() == 6 {
            normals.push(Vec3::new(values[3], values[4], values[5]));
        }
    }
    Ok(PointData {
        points,
        normals: (columns == Some(6)).then_some(normals),
        colors: None,
        faces: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Scalar> {
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar {
        name: String,
        ty: Scalar,
    },
    List {
        name: String,
        count: Scalar,
        item: Scalar,
    },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Reads scalar and list values one at a time from either encoding.
enum Cursor<'a> {
    Ascii {
        lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
        tokens: Vec<&'a str>,
        pos: usize,
        line: usize,
        /// Header lines before the body, so reported lines are file-relative.
        first_line: usize,
    },
    Binary {
        data: &'a [u8],
        offset: usize,
        base: usize,
    },
}

impl<'a> Cursor<'a> {
    fn location(&self) -> String {
        match self {
            Cursor::Ascii { line, .. } => format!("line {line}"),
            Cursor::Binary { offset, base, .. } => format!("byte {}", base + offset),
        }
    }

    /// Starts a new element record (ASCII records are one line each).
    fn begin_record(&mut self) -> Result<(), String> {
        if let Cursor::Ascii {
            lines,
            tokens,
            pos,
            line,
            first_line,
        } = self
        {
            loop {
                let Some((i, text)) = lines.next() else {
                    return Err("unexpected end of file".into());
                };
                *line = *first_line + i + 1;
                let t: Vec<&str> = text.split_whitespace().collect();
                if !t.is_empty() {
                    *tokens = t;
                    *pos = 0;
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn end_record(&self) -> Result<(), String> {
        if let Cursor::Ascii { tokens, pos, .. } = self {
            if *pos != tokens.len() {
                return Err(format!("expected {} values, found {}", pos, tokens.len()));
            }
        }
        Ok(())
    }

    fn next(&mut self, ty: Scalar) -> Result<f64, String> {
        match self {
            Cursor::Ascii { tokens, pos, .. } => {
                let t = tokens.get(*pos).ok_or("too few values on line")?;
                *pos += 1;
                t.parse::<f64>()
                    .map_err(|e| format!("bad number `{t}`: {e}"))
            }
            Cursor::Binary { data, offset, .. } => {
                let end = *offset + ty.size();
                if end > data.len() {
                    return Err("unexpected end of file".into());
                }
                let v = ty.read_le(&data[*offset..end]);
                *offset = end;
                Ok(v)
            }
        }
    }

    fn trailing(&mut self) -> bool {
        match self {
            Cursor::Ascii { lines, .. } => lines.any(|(_, l)| !l.trim().is_empty()),
            Cursor::Binary { data, offset, .. } => *offset < data.len(),
        }
    }
}

fn parse_ply(path: &Path, bytes: &[u8]) -> CliResult<PointData> {
    let err = |loc: String, msg: String| CliError::parse(path, loc, msg);
    let header_end =
        find_header_end(bytes).ok_or_else(|| err("header".into(), "missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end.0])
        .map_err(|_| err("header".into(), "header is not ASCII".into()))?;
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err("line 1".into(), "missing `ply` magic".into())),
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, raw) in lines {
        let loc = format!("line {}", i + 1);
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", "binary_big_endian", _] => {
                return Err(err(
                    loc,
                    "big-endian PLY is not supported; convert to little-endian".into(),
                ))
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| err(loc.clone(), format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(err(loc, "unknown list property type".into()));
                };
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(loc.clone(), "property before element".into()))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| err(loc.clone(), format!("unknown property type `{ty}`")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(loc.clone(), "property before element".into()))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => {
                return Err(err(
                    loc,
                    format!("unrecognized header line `{}`", raw.trim()),
                ))
            }
        }
    }
    let binary = binary.ok_or_else(|| err("header".into(), "missing format line".into()))?;
    let body = &bytes[header_end.1..];
    let header_lines = header.lines().count();
    let mut cursor = if binary {
        Cursor::Binary {
            data: body,
            offset: 0,
            base: header_end.1,
        }
    } else {
        let text = std::str::from_utf8(body)
            .map_err(|_| err("body".into(), "ASCII body is not UTF-8".into()))?;
        Cursor::Ascii {
            lines: text.lines().enumerate().peekable(),
            tokens: Vec::new(),
            pos: 0,
            line: header_lines,
            first_line: header_lines,
        }
    };

    let mut data = PointData::default();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let index_of = |n: &str| {
            el.properties
                .iter()
                .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
        };
        let xyz = [index_of("x"), index_of("y"), index_of("z")];
        let nxyz = [index_of("nx"), index_of("ny"), index_of("nz")];
        let rgb = [index_of("red"), index_of("green"), index_of("blue")];
        if is_vertex && xyz.iter().any(Option::is_none) {
            return Err(err(
                "header".into(),
                "vertex element lacks x, y or z".into(),
            ));
        }
        let has_normals = is_vertex && nxyz.iter().all(Option::is_some);
        let has_colors = is_vertex && rgb.iter().all(Option::is_some);
        let mut normals = Vec::new();
        let mut colors = Vec::new();
        let mut row = vec![0.0f64; el.properties.len()];
        for record in 0..el.count {
            cursor.begin_record().map_err(|m| {
                err(
                    cursor.location(),
                    format!("{} {record} of {}: {m}", el.name, el.count),
                )
            })?;
            let mut list: Vec<f64> = Vec::new();
            for (pi, prop) in el.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        row[pi] = cursor.next(*ty).map_err(|m| {
                            err(cursor.location(), format!("{} {record}: {m}", el.name))
                        })?;
                    }
                    Property::List { count, item, name } => {
                        let k = cursor.next(*count).map_err(|m| err(cursor.location(), m))?;
                        if !(k >= 0.0) {
                            return Err(err(
                                cursor.location(),
                                format!("negative list length in {name}"),
                            ));
                        }
                        let mut values = Vec::with_capacity(k as usize);
                        for _ in 0..k as usize {
                            values.push(cursor.next(*item).map_err(|m| err(cursor.location(), m))?);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = values;
                        }
                    }
                }
            }
            cursor.end_record().map_err(|m| err(cursor.location(), m))?;
            if is_vertex {
                let g = |i: Option<usize>| row[i.unwrap_or(0)];
                data.points.push(Vec3::new(g(xyz[0]), g(xyz[1]), g(xyz[2])));
                if has_normals {
                    normals.push(Vec3::new(g(nxyz[0]), g(nxyz[1]), g(nxyz[2])));
                }
                if has_colors {
                    colors.push([g(rgb[0]) as u8, g(rgb[1]) as u8, g(rgb[2]) as u8]);
                }
            } else if is_face && list.len() >= 3 {
                let idx: Vec<usize> = list.iter().map(|&v| v as usize).collect();
                for j in 1..idx.len() - 1 {
                    data.faces.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
        }
        if is_vertex {
            data.normals = has_normals.then_some(normals);
            data.colors = has_colors.then_some(colors);
        }
    }
    if cursor.trailing() {
        return Err(err(
            cursor.location(),
            "data beyond the declared element counts".into(),
        ));
    }
    Ok(data)
}

/// Byte ranges: header text length (up to `end_header`) and body start.
fn find_header_end(bytes: &[u8]) -> Option<(usize, usize)> {
    let marker = b"end_header";
    let pos = bytes.windows(marker.len()).position(|w| w == marker)?;
    let mut body = pos + marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    Some((pos + marker.len(), body))
}

/// OBJ (`v` and `f` lines, polygons fan-triangulated) or PLY with a face element.
pub fn read_mesh(path: &Path) -> CliResult<TriangleMesh> {
    match extension(path).as_deref() {
        Some("obj") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_obj(path, &text)
        }
        Some("ply") => {
            let data = read_point_data(path)?;
            if data.faces.is_empty() {
                return Err(CliError::parse(path, "header", "PLY has no faces"));
            }
            check_face_indices(path, &data.faces, data.points.len())?;
            Ok(TriangleMesh::new(data.points, data.faces)?)
        }
        _ => Err(CliError::Usage(format!(
            "{}: unknown mesh extension (expected .obj or .ply)",
            path.display()
        ))),
    }
}

fn check_face_indices(path: &Path, faces: &[[usize; 3]], n: usize) -> CliResult<()> {
    for (i, f) in faces.iter().enumerate() {
        if f.iter().any(|&v| v >= n) {
            return Err(CliError::parse(
                path,
                format!("face {i}"),
                format!("vertex index out of range (mesh has {n} vertices)"),
            ));
        }
    }
    Ok(())
}

pub fn parse_obj(path: &Path, text: &str) -> CliResult<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let loc = || format!("line {}", i + 1);
        let mut t = line.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<f64> = t
                    .take(3)
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| CliError::parse(path, loc(), format!("bad vertex: {e}")))?;
                if c.len() != 3 {
                    return Err(CliError::parse(path, loc(), "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in t {
                    let first = tok.split('/').next().unwrap_or("");
                    let v: i64 = first.parse().map_err(|_| {
                        CliError::parse(path, loc(), format!("bad face index `{tok}`"))
                    })?;
                    let resolved = if v > 0 {
                        v - 1
                    } else if v < 0 {
                        vertices.len() as i64 + v
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(CliError::parse(
                            path,
                            loc(),
                            format!("face index {v} out of range"),
                        ));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(CliError::parse(
                        path,
                        loc(),
                        "face needs at least 3 vertices",
                    ));
                }
                for j in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, faces)?)
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = (|| -> std::io::Result<()> {
        for v in mesh.vertices() {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        w.flush()
    })();
    result.map_err(|e| CliError::io(path, e))
}

//! Minimal PLY reader/writer for point-cloud maps.
//!
//! Writing emits binary little-endian PLY with float32 x, y, z (plus
//! optional float64 time and float32 origin_* when the cloud carries
//! them). Reading accepts ascii and binary_little_endian files with
//! float or double scalar vertex properties.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Point3;

use crate::error::{CoreError, Result};
use crate::geom::PointCloudMap;

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl ScalarType {
    fn parse(s: &str) -> Option<ScalarType> {
        Some(match s {
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            _ => return None,
        })
    }

    fn size(&self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::F32 | ScalarType::I32 | ScalarType::U32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_binary(&self, r: &mut impl Read) -> std::io::Result<f64> {
        Ok(match self {
            ScalarType::F32 => r.read_f32::<LittleEndian>()? as f64,
            ScalarType::F64 => r.read_f64::<LittleEndian>()?,
            ScalarType::I8 => r.read_i8()? as f64,
            ScalarType::U8 => r.read_u8()? as f64,
            ScalarType::I16 => r.read_i16::<LittleEndian>()? as f64,
            ScalarType::U16 => r.read_u16::<LittleEndian>()? as f64,
            ScalarType::I32 => r.read_i32::<LittleEndian>()? as f64,
            ScalarType::U32 => r.read_u32::<LittleEndian>()? as f64,
        })
    }
}

/// Write a point set as binary little-endian PLY.
pub fn write_ply(
    path: &Path,
    points: &[Point3<f64>],
    timestamps: Option<&[f64]>,
    origins: Option<&[Point3<f64>]>,
) -> Result<()> {
    if let Some(ts) = timestamps {
        if ts.len() != points.len() {
            return Err(CoreError::LengthMismatch(format!(
                "{} timestamps for {} points",
                ts.len(),
                points.len()
            )));
        }
    }
    if let Some(os) = origins {
        if os.len() != points.len() {
            return Err(CoreError::LengthMismatch(format!(
                "{} origins for {} points",
                os.len(),
                points.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "ply\nformat binary_little_endian 1.0\n")?;
    write!(w, "element vertex {}\n", points.len())?;
    write!(w, "property float x\nproperty float y\nproperty float z\n")?;
    if timestamps.is_some() {
        write!(w, "property double time\n")?;
    }
    if origins.is_some() {
        write!(
            w,
            "property float origin_x\nproperty float origin_y\nproperty float origin_z\n"
        )?;
    }
    write!(w, "end_header\n")?;
    for (i, p) in points.iter().enumerate() {
        w.write_f32::<LittleEndian>(p.x as f32)?;
        w.write_f32::<LittleEndian>(p.y as f32)?;
        w.write_f32::<LittleEndian>(p.z as f32)?;
        if let Some(ts) = timestamps {
            w.write_f64::<LittleEndian>(ts[i])?;
        }
        if let Some(os) = origins {
            w.write_f32::<LittleEndian>(os[i].x as f32)?;
            w.write_f32::<LittleEndian>(os[i].y as f32)?;
            w.write_f32::<LittleEndian>(os[i].z as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Convenience: write a map's points (and optional attributes) to PLY.
pub fn write_map_ply(path: &Path, map: &PointCloudMap) -> Result<()> {
    write_ply(path, map.points(), map.timestamps(), map.observation_origins())
}

struct Property {
    name: String,
    ty: ScalarType,
}

/// Read a PLY vertex cloud into a map. Recognized properties: x, y, z
/// (required), time/timestamp, origin_x/origin_y/origin_z.
pub fn read_ply(path: &Path) -> Result<PointCloudMap> {
    let parse_err = |message: String| CoreError::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut r = BufReader::new(File::open(path)?);

    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err("not a PLY file".into()));
    }
    let mut binary = None;
    let mut count = 0usize;
    let mut properties: Vec<Property> = Vec::new();
    let mut in_vertex_element = false;
    let mut trailing_elements = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(parse_err("unexpected end of header".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            Some("comment") | None => {}
            Some("format") => match tokens.get(1).copied() {
                Some("ascii") => binary = Some(false),
                Some("binary_little_endian") => binary = Some(true),
                other => {
                    return Err(parse_err(format!("unsupported format {other:?}")));
                }
            },
            Some("element") => {
                if tokens.get(1).copied() == Some("vertex") {
                    in_vertex_element = true;
                    count = tokens
                        .get(2)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("bad vertex count".into()))?;
                } else {
                    in_vertex_element = false;
                    let n: usize = tokens.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
                    if n > 0 {
                        trailing_elements = true;
                    }
                }
            }
            Some("property") => {
                if in_vertex_element {
                    if tokens.get(1).copied() == Some("list") {
                        return Err(parse_err("list properties on vertices unsupported".into()));
                    }
                    let ty = tokens
                        .get(1)
                        .and_then(|s| ScalarType::parse(s))
                        .ok_or_else(|| parse_err(format!("unsupported property type in {line}")))?;
                    let name = tokens
                        .get(2)
                        .ok_or_else(|| parse_err("property without name".into()))?
                        .to_string();
                    properties.push(Property { name, ty });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(format!("unexpected header line {other}")));
            }
        }
    }
    let binary = binary.ok_or_else(|| parse_err("missing format line".into()))?;
    let _ = trailing_elements; // ignored: vertex data precedes them

    let find = |name: &str| properties.iter().position(|p| p.name == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(parse_err("missing x/y/z vertex properties".into())),
    };
    let it = find("time").or_else(|| find("timestamp"));
    let iorigin = match (find("origin_x"), find("origin_y"), find("origin_z")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };

    let mut points = Vec::with_capacity(count);
    let mut timestamps = it.map(|_| Vec::with_capacity(count));
    let mut origins = iorigin.map(|_| Vec::with_capacity(count));
    let mut values = vec![0.0f64; properties.len()];
    if binary {
        for _ in 0..count {
            for (k, prop) in properties.iter().enumerate() {
                values[k] = prop.ty.read_binary(&mut r)?;
            }
            collect_vertex(
                &values, ix, iy, iz, it, iorigin, &mut points, &mut timestamps, &mut origins,
            );
        }
    } else {
        for _ in 0..count {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(parse_err("unexpected end of vertex data".into()));
            }
            let mut it_tok = line.split_whitespace();
            for (k, value) in values.iter_mut().enumerate() {
                let tok = it_tok
                    .next()
                    .ok_or_else(|| parse_err(format!("short vertex line, property {k}")))?;
                *value = tok
                    .parse()
                    .map_err(|e| parse_err(format!("bad number {tok}: {e}")))?;
            }
            collect_vertex(
                &values, ix, iy, iz, it, iorigin, &mut points, &mut timestamps, &mut origins,
            );
        }
    }
    PointCloudMap::new(points, timestamps, origins)
}

#[allow(clippy::too_many_arguments)]
fn collect_vertex(
    values: &[f64],
    ix: usize,
    iy: usize,
    iz: usize,
    it: Option<usize>,
    iorigin: Option<(usize, usize, usize)>,
    points: &mut Vec<Point3<f64>>,
    timestamps: &mut Option<Vec<f64>>,
    origins: &mut Option<Vec<Point3<f64>>>,
) {
    points.push(Point3::new(values[ix], values[iy], values[iz]));
    if let (Some(i), Some(ts)) = (it, timestamps.as_mut()) {
        ts.push(values[i]);
    }
    if let (Some((a, b, c)), Some(os)) = (iorigin, origins.as_mut()) {
        os.push(Point3::new(values[a], values[b], values[c]));
    }
}

/// PLY property size table, exposed for header diagnostics in tests.
#[allow(dead_code)]
fn property_size(ty: ScalarType) -> usize {
    ty.size()
}

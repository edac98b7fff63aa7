use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Point, PointCloud};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Points and optional per-point class labels read back from a PLY file.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyData {
    pub cloud: PointCloud,
    pub labels: Option<Vec<u8>>,
}

/// Writes `x y z intensity` as float properties, plus a `uchar class`
/// property when labels are given.
pub fn write_ply(
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(labels) = labels {
        if labels.len() != cloud.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} points",
                labels.len(),
                cloud.len()
            )));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_body(&mut out, cloud, labels, format).map_err(|e| Error::io(path, e))
}

fn write_body(
    out: &mut impl Write,
    cloud: &PointCloud,
    labels: Option<&[u8]>,
    format: PlyFormat,
) -> std::io::Result<()> {
    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply")?;
    writeln!(out, "format {format_name} 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z", "intensity"] {
        writeln!(out, "property float {name}")?;
    }
    if labels.is_some() {
        writeln!(out, "property uchar class")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        let values = [p.position.x, p.position.y, p.position.z, p.intensity];
        match format {
            PlyFormat::Ascii => {
                // `{}` on f32 prints the shortest string that round-trips.
                write!(out, "{} {} {} {}", values[0], values[1], values[2], values[3])?;
                if let Some(l) = labels {
                    write!(out, " {}", l[i])?;
                }
                writeln!(out)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in values {
                    out.write_all(&v.to_le_bytes())?;
                }
                if let Some(l) = labels {
                    out.write_all(&[l[i]])?;
                }
            }
        }
    }
    out.flush()
}

#[derive(Clone, Copy, Debug)]
enum Scalar {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "uchar" | "uint8" => Scalar::U8,
            "char" | "int8" => Scalar::I8,
            "ushort" | "uint16" => Scalar::U16,
            "short" | "int16" => Scalar::I16,
            "uint" | "uint32" => Scalar::U32,
            "int" | "int32" => Scalar::I32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::U8 | Scalar::I8 => 1,
            Scalar::U16 | Scalar::I16 => 2,
            Scalar::U32 | Scalar::I32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::U8 => b[0] as f64,
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

/// Reads the vertex element of an ASCII or little-endian binary PLY file.
/// The vertex element must come first and hold only scalar properties; `x y z` are required,
/// `intensity` and `class` are picked up when present.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyData> {
    let path = path.as_ref();
    let malformed = |reason: String| Error::MalformedFile {
        path: path.to_path_buf(),
        reason,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut format = None;
    let mut count = 0usize;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(malformed("missing end_header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => return Err(malformed(format!("unsupported format {other}"))),
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = n.parse().map_err(|_| malformed(format!("bad count {n}")))?;
                }
            }
            ["property", ty, name] if in_vertex => {
                let ty = Scalar::parse(ty).ok_or_else(|| malformed(format!("type {ty}")))?;
                props.push((name.to_string(), ty));
            }
            ["property", "list", ..] if in_vertex => {
                return Err(malformed("list properties on vertices".into()))
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| malformed("missing format line".into()))?;
    let find = |n: &str| props.iter().position(|(name, _)| name == n);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(malformed("vertex lacks x/y/z".into())),
    };
    let (ii, ic) = (find("intensity"), find("class"));

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    match format {
        PlyFormat::Ascii => {
            for _ in 0..count {
                line.clear();
                reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .zip(&props)
                    .map(|(t, (_, ty))| match ty {
                        // Parse at storage width to avoid double rounding.
                        Scalar::F32 => t.parse::<f32>().map(f64::from),
                        _ => t.parse::<f64>(),
                    })
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(format!("vertex row: {e}")))?;
                if row.len() != props.len() {
                    return Err(malformed(format!("vertex row has {} values", row.len())));
                }
                rows.push(row);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
            let mut buf = vec![0u8; stride];
            for _ in 0..count {
                reader
                    .read_exact(&mut buf)
                    .map_err(|_| malformed("truncated vertex data".into()))?;
                let mut offset = 0;
                let row = props
                    .iter()
                    .map(|(_, t)| {
                        let v = t.decode(&buf[offset..offset + t.size()]);
                        offset += t.size();
                        v
                    })
                    .collect();
                rows.push(row);
            }
        }
    }

    let points = rows
        .iter()
        .map(|r| {
            Point::new(
                r[ix] as f32,
                r[iy] as f32,
                r[iz] as f32,
                ii.map_or(0.0, |i| r[i] as f32),
            )
        })
        .collect();
    let labels = ic.map(|i| rows.iter().map(|r| r[i] as u8).collect());
    Ok(PlyData {
        cloud: PointCloud::new(points, 0),
        labels,
    })
}

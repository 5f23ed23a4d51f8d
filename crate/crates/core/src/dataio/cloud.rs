//! ASCII PLY and whitespace-separated XYZ point clouds.

use std::fmt::Write as _;
use std::path::Path;

use super::{format_real, parse_real, read_text, write_text};
use crate::error::{Error, Result};
use crate::grasp::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ply,
    Xyz,
}

impl CloudFormat {
    /// PLY for a `.ply` extension, XYZ otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Xyz,
        }
    }
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    parse_point_cloud(&read_text(path)?, path)
}

/// Parses cloud text; a first line of `ply` selects PLY, anything else XYZ.
pub fn parse_point_cloud(text: &str, path: &Path) -> Result<PointCloud> {
    if text.lines().next().map(str::trim) == Some("ply") {
        parse_ply(text, path)
    } else {
        parse_xyz(text, path)
    }
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    cloud.validate()?;
    let text = match CloudFormat::from_path(path) {
        CloudFormat::Ply => ply_text(cloud),
        CloudFormat::Xyz => xyz_text(cloud),
    };
    write_text(path, &text)
}

fn push_vec(line: &mut String, v: &Vec3) {
    for c in v.iter() {
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&format_real(*c));
    }
}

fn xyz_text(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let mut line = String::new();
        push_vec(&mut line, p);
        if let Some(n) = &cloud.normals {
            push_vec(&mut line, &n[i]);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn ply_text(cloud: &PointCloud) -> String {
    let mut out = format!("ply\nformat ascii 1.0\nelement vertex {}\n", cloud.len());
    for p in ["x", "y", "z"] {
        let _ = writeln!(out, "property float {p}");
    }
    if cloud.normals.is_some() {
        for p in ["nx", "ny", "nz"] {
            let _ = writeln!(out, "property float {p}");
        }
    }
    if cloud.colors.is_some() {
        for p in ["red", "green", "blue"] {
            let _ = writeln!(out, "property uchar {p}");
        }
    }
    out.push_str("end_header\n");
    for i in 0..cloud.len() {
        let mut line = String::new();
        push_vec(&mut line, &cloud.points[i]);
        if let Some(n) = &cloud.normals {
            push_vec(&mut line, &n[i]);
        }
        if let Some(c) = &cloud.colors {
            for v in c[i] {
                let _ = write!(line, " {}", (v * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn unit_normal(path: &Path, line: usize, n: Vec3) -> Result<Vec3> {
    let len = n.norm();
    if !(len > 1e-12) {
        return Err(Error::parse(path, line, "normal has zero length"));
    }
    Ok(n / len)
}

fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 3 && tokens.len() != 6 {
            return Err(Error::parse(path, line, format!("expected 3 or 6 columns, found {}", tokens.len())));
        }
        match columns {
            None => columns = Some(tokens.len()),
            Some(c) if c != tokens.len() => {
                return Err(Error::parse(path, line, format!("expected {c} columns like earlier rows, found {}", tokens.len())));
            }
            _ => {}
        }
        let v: Vec<f64> = tokens
            .iter()
            .enumerate()
            .map(|(k, t)| parse_real(path, line, &format!("column {}", k + 1), t))
            .collect::<Result<_>>()?;
        points.push(Vec3::new(v[0], v[1], v[2]));
        if v.len() == 6 {
            normals.push(unit_normal(path, line, Vec3::new(v[3], v[4], v[5]))?);
        }
    }
    Ok(PointCloud {
        points,
        normals: (columns == Some(6)).then_some(normals),
        colors: None,
    })
}

const PROPERTY_NAMES: [&str; 9] = ["x", "y", "z", "nx", "ny", "nz", "red", "green", "blue"];
const PROPERTY_TYPES: [&str; 8] = ["float", "float32", "double", "float64", "uchar", "uint8", "int", "uint"];

fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    lines.next();
    let mut count: Option<usize> = None;
    let mut props: Vec<usize> = Vec::new();
    let mut header_done = false;
    let mut format_seen = false;
    for (line, l) in lines.by_ref() {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", "1.0"] => format_seen = true,
            ["format", ..] => return Err(Error::parse(path, line, "only 'format ascii 1.0' is supported")),
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(Error::parse(path, line, "duplicate vertex element"));
                }
                count = Some(n.parse().map_err(|_| Error::parse(path, line, format!("bad vertex count '{n}'")))?);
            }
            ["element", other, ..] => {
                return Err(Error::parse(path, line, format!("unsupported element '{other}'")));
            }
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(Error::parse(path, line, "property before 'element vertex'"));
                }
                if !PROPERTY_TYPES.contains(ty) {
                    return Err(Error::parse(path, line, format!("unsupported property type '{ty}'")));
                }
                let Some(k) = PROPERTY_NAMES.iter().position(|p| p == name) else {
                    return Err(Error::parse(path, line, format!("unsupported property '{name}'")));
                };
                if props.contains(&k) {
                    return Err(Error::parse(path, line, format!("duplicate property '{name}'")));
                }
                props.push(k);
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(Error::parse(path, line, format!("unrecognized header line '{l}'"))),
        }
    }
    let header_end = text.lines().take_while(|l| l.trim() != "end_header").count() + 1;
    if !header_done {
        return Err(Error::parse(path, header_end, "missing 'end_header'"));
    }
    if !format_seen {
        return Err(Error::parse(path, header_end, "missing 'format ascii 1.0'"));
    }
    let Some(count) = count else {
        return Err(Error::parse(path, header_end, "missing 'element vertex'"));
    };
    let has = |group: std::ops::Range<usize>| -> Result<bool> {
        let n = group.clone().filter(|k| props.contains(k)).count();
        match n {
            0 => Ok(false),
            3 => Ok(true),
            _ => Err(Error::parse(
                path,
                header_end,
                format!("properties {} must appear together", PROPERTY_NAMES[group].join(", ")),
            )),
        }
    };
    if !has(0..3)? {
        return Err(Error::parse(path, header_end, "vertex needs x, y and z"));
    }
    let with_normals = has(3..6)?;
    let with_colors = has(6..9)?;

    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut last_line = header_end;
    for (line, l) in lines {
        last_line = line;
        if l.is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(Error::parse(path, line, format!("more than {count} vertex rows")));
        }
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != props.len() {
            return Err(Error::parse(path, line, format!("expected {} columns, found {}", props.len(), tokens.len())));
        }
        let mut v = [0.0; 9];
        for (t, &k) in tokens.iter().zip(&props) {
            v[k] = parse_real(path, line, PROPERTY_NAMES[k], t)?;
        }
        points.push(Vec3::new(v[0], v[1], v[2]));
        if with_normals {
            normals.push(unit_normal(path, line, Vec3::new(v[3], v[4], v[5]))?);
        }
        if with_colors {
            let mut c = [0.0; 3];
            for (j, ch) in c.iter_mut().enumerate() {
                let raw = v[6 + j];
                if !(0.0..=255.0).contains(&raw) {
                    return Err(Error::parse(path, line, format!("color {raw} outside 0..255")));
                }
                *ch = raw / 255.0;
            }
            colors.push(c);
        }
    }
    if points.len() != count {
        return Err(Error::parse(path, last_line, format!("expected {count} vertex rows, found {}", points.len())));
    }
    Ok(PointCloud {
        points,
        normals: with_normals.then_some(normals),
        colors: with_colors.then_some(colors),
    })
}

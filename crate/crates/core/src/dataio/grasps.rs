//! Grasp lists as CSV: `cx,cy,cz,rx,ry,rz,theta,sq`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use super::{format_real, parse_real, read_text, write_text};
use crate::error::{Error, Result};
use crate::grasp::{Grasp, ScoredGrasp, Vec3};

pub const GRASP_HEADER: &str = "cx,cy,cz,rx,ry,rz,theta,sq";

/// Orientations further than this from unit length are rejected.
const UNIT_SLACK: f64 = 1e-6;
/// Printed θ and s_q may round just past their bounds by this much.
const ROUNDING_SLACK: f64 = 1e-8;

pub fn write_grasps(path: &Path, grasps: &[ScoredGrasp]) -> Result<()> {
    let mut out = String::with_capacity(64 * (grasps.len() + 1));
    out.push_str(GRASP_HEADER);
    out.push('\n');
    for g in grasps {
        out.push_str(&grasp_row(g));
        out.push('\n');
    }
    write_text(path, &out)
}

/// One CSV row as written by [`write_grasps`], without the newline.
pub fn grasp_row(g: &ScoredGrasp) -> String {
    let (c, r) = (g.grasp.center, g.grasp.orientation);
    [c.x, c.y, c.z, r.x, r.y, r.z, g.grasp.theta, g.s_q].map(format_real).join(",")
}

pub fn read_grasps(path: &Path) -> Result<Vec<ScoredGrasp>> {
    parse_grasps(&read_text(path)?, path)
}

fn snap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo && v >= lo - ROUNDING_SLACK {
        lo
    } else if v > hi && v <= hi + ROUNDING_SLACK {
        hi
    } else {
        v
    }
}

pub fn parse_grasps(text: &str, path: &Path) -> Result<Vec<ScoredGrasp>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == GRASP_HEADER => {}
        Some((_, h)) => {
            return Err(Error::parse(path, 1, format!("expected header '{GRASP_HEADER}', found '{h}'")));
        }
        None => return Err(Error::parse(path, 1, "missing header")),
    }
    let names: Vec<&str> = GRASP_HEADER.split(',').collect();
    let mut out = Vec::new();
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::parse(path, line, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let v: Vec<f64> = fields
            .iter()
            .zip(&names)
            .map(|(t, n)| parse_real(path, line, n, t))
            .collect::<Result<_>>()?;
        let r = Vec3::new(v[3], v[4], v[5]);
        if (r.norm() - 1.0).abs() > UNIT_SLACK {
            return Err(Error::parse(path, line, format!("orientation length {} is not 1", r.norm())));
        }
        let theta = snap(v[6], -FRAC_PI_2, FRAC_PI_2);
        let s_q = snap(v[7], 0.0, 1.0);
        let grasp = Grasp::new(Vec3::new(v[0], v[1], v[2]), r / r.norm(), theta)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(ScoredGrasp::new(grasp, s_q).map_err(|e| Error::parse(path, line, e.to_string()))?);
    }
    Ok(out)
}

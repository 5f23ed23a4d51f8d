//! Text file formats. Every parser reports the file and line of the first problem.

mod cloud;
mod config;
mod fields;
mod grasps;
mod labels;
mod scene;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use cloud::{parse_point_cloud, read_point_cloud, write_point_cloud, CloudFormat};
pub use config::{parse_config, read_config, Config};
pub use fields::{parse_confidence, parse_xy, read_confidence, read_xy, write_confidence};
pub use grasps::{grasp_row, parse_grasps, read_grasps, write_grasps, GRASP_HEADER};
pub use labels::{write_anchor_labels, write_refine_labels, AnchorLabelRow, RefineLabelRow};
pub use scene::{read_policy, read_scene_record, write_policy, SceneRecord};

/// Formats `v` with 9 significant digits, dropping trailing zeros.
pub fn format_real(v: f64) -> String {
    format_sig(v, 9)
}

fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // Round first so the exponent reflects the printed mantissa.
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses one real, naming the line on failure and rejecting non-finite values.
fn parse_real(path: &Path, line: usize, field: &str, token: &str) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{field}: cannot parse '{token}' as a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("{field}: value {v} is not finite")));
    }
    Ok(v)
}

//! Scene records tying a cloud to per-width grasp and confidence files, and
//! analytic-policy coefficient files.

use std::path::{Path, PathBuf};

use super::config::read_config;
use super::{format_real, read_confidence, read_grasps, read_point_cloud, write_text};
use crate::confidence::ConfidenceField;
use crate::error::{Error, Result};
use crate::grasp::{PointCloud, ScoredGrasp};
use crate::policy::{AnalyticPolicy, LinearFit, SigmoidFit};

/// A scene and its per-gripper-width annotations.
///
/// On disk this is a config file:
///
/// ```text
/// scene_id = scene_0001
/// cloud = scene.ply
/// widths = 0.06, 0.08
/// grasps.0.06 = grasps_w060.csv
/// confidence.0.06 = conf_w060.txt
/// ```
///
/// Relative paths resolve against the record's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub cloud: PathBuf,
    /// Strictly increasing gripper widths, meters.
    pub widths: Vec<f64>,
    /// Grasp list per width, aligned with `widths`.
    pub grasps: Vec<Option<PathBuf>>,
    /// Confidence field per width, aligned with `widths`.
    pub confidence: Vec<Option<PathBuf>>,
}

pub fn read_scene_record(path: &Path) -> Result<SceneRecord> {
    let cfg = read_config(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let required = |key: &str| -> Result<String> {
        cfg.get_str(key)
            .map(str::to_string)
            .ok_or_else(|| cfg.error_at(key, format!("missing key '{key}'")))
    };
    let scene_id = required("scene_id")?;
    let cloud = base.join(required("cloud")?);
    let widths_text = required("widths")?;
    let widths: Vec<f64> = widths_text
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| cfg.error_at("widths", format!("bad width '{}'", w.trim())))
        })
        .collect::<Result<_>>()?;
    if widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(cfg.error_at("widths", "widths must be strictly increasing"));
    }
    let width_key = |prefix: &str, key: &str| -> Result<Option<usize>> {
        let Some(w) = key.strip_prefix(prefix) else {
            return Ok(None);
        };
        let v: f64 = w
            .parse()
            .map_err(|_| cfg.error_at(key, format!("bad width in key '{key}'")))?;
        widths
            .iter()
            .position(|x| (x - v).abs() < 1e-12)
            .map(Some)
            .ok_or_else(|| cfg.error_at(key, format!("width {v} is not listed in 'widths'")))
    };
    let mut grasps = vec![None; widths.len()];
    let mut confidence = vec![None; widths.len()];
    for key in cfg.keys() {
        let value = || base.join(cfg.get_str(key).unwrap_or_default());
        if let Some(i) = width_key("grasps.", key)? {
            grasps[i] = Some(value());
        } else if let Some(i) = width_key("confidence.", key)? {
            confidence[i] = Some(value());
        } else if !["scene_id", "cloud", "widths"].contains(&key) {
            return Err(cfg.error_at(key, format!("unknown key '{key}'")));
        }
    }
    let record = SceneRecord { scene_id, cloud, widths, grasps, confidence };
    for f in std::iter::once(&record.cloud).chain(record.grasps.iter().chain(&record.confidence).flatten()) {
        if !f.is_file() {
            return Err(Error::io(f, std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist")));
        }
    }
    Ok(record)
}

impl SceneRecord {
    pub fn load_cloud(&self) -> Result<PointCloud> {
        read_point_cloud(&self.cloud)
    }

    fn width_index(&self, width: f64) -> Result<usize> {
        self.widths
            .iter()
            .position(|w| (w - width).abs() < 1e-12)
            .ok_or_else(|| Error::InvalidInput(format!("scene {} has no width {width}", self.scene_id)))
    }

    /// Grasp set for one width, empty when none is recorded.
    pub fn load_grasps(&self, width: f64) -> Result<Vec<ScoredGrasp>> {
        match &self.grasps[self.width_index(width)?] {
            Some(p) => read_grasps(p),
            None => Ok(Vec::new()),
        }
    }

    /// Union of all per-width grasp sets, in width order.
    pub fn load_all_grasps(&self) -> Result<Vec<ScoredGrasp>> {
        let mut all = Vec::new();
        for p in self.grasps.iter().flatten() {
            all.extend(read_grasps(p)?);
        }
        Ok(all)
    }

    pub fn load_confidence(&self, width: f64) -> Result<Option<ConfidenceField>> {
        self.confidence[self.width_index(width)?].as_deref().map(read_confidence).transpose()
    }
}

const POLICY_KEYS: [&str; 4] = ["a", "b", "slope", "intercept"];

/// Reads `a`, `b`, `slope`, `intercept`; absent keys keep the values of `base`.
///
/// This lets a file holding only a sigmoid or only a linear fit be combined
/// with the other half of an existing policy.
pub fn read_policy(path: &Path, base: &AnalyticPolicy) -> Result<AnalyticPolicy> {
    let cfg = read_config(path)?;
    cfg.reject_unknown(&POLICY_KEYS)?;
    Ok(AnalyticPolicy {
        sigmoid: SigmoidFit { a: cfg.real_or("a", base.sigmoid.a)?, b: cfg.real_or("b", base.sigmoid.b)? },
        linear: LinearFit {
            slope: cfg.real_or("slope", base.linear.slope)?,
            intercept: cfg.real_or("intercept", base.linear.intercept)?,
        },
    })
}

pub fn write_policy(path: &Path, policy: &AnalyticPolicy) -> Result<()> {
    let vals = [policy.sigmoid.a, policy.sigmoid.b, policy.linear.slope, policy.linear.intercept];
    let text: String = POLICY_KEYS
        .iter()
        .zip(vals)
        .map(|(k, v)| format!("{k} = {}\n", format_real(v)))
        .collect();
    write_text(path, &text)
}

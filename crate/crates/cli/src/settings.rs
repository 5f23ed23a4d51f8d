//! Layered settings: command-line flag, then `--set`, then the config file,
//! then the built-in default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use grasplab::dataio::{read_config, Config};
use grasplab::GripperParams;

/// Every key a config file or `--set` may name.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "subsample",
    "gripper.depth",
    "gripper.width",
    "gripper.height",
    "gripper.thickness",
    "normals.k",
    "sampler.centers",
    "sampler.orientations",
    "sampler.angles",
    "sampler.angle_range",
    "sampler.neighbors",
    "confidence.d_th",
    "labels.k1",
    "anchors.m",
    "anchors.c_b",
    "anchors.positive",
    "anchors.negative",
    "refine.d1",
    "refine.d2",
    "refine.beta1",
    "refine.beta2",
    "refine.gamma1",
    "refine.gamma2",
    "region.radius",
    "region.keep",
    "closing.keep",
    "eval.pool",
    "eval.top",
    "eval.radius",
    "losscheck.h",
    "losscheck.configs",
    "losscheck.tol",
    "fit.tol",
    "fit.max_iter",
    "fit.a0",
    "fit.b0",
];

/// A failure mapped to the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CHECK, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Library errors raised while processing inputs are data errors.
impl From<grasplab::Error> for CliError {
    fn from(e: grasplab::Error) -> Self {
        CliError::data(e.to_string())
    }
}

pub struct Settings {
    cfg: Config,
}

impl Settings {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => read_config(p)?,
            None => Config::default(),
        };
        for o in overrides {
            cfg.apply_override(o).map_err(|e| CliError::usage(e.to_string()))?;
        }
        cfg.reject_unknown(KNOWN_KEYS).map_err(|e| CliError::usage(e.to_string()))?;
        Ok(Settings { cfg })
    }

    /// `flag` if given, else the configured value, else `default`.
    pub fn value<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self.cfg.get_or(key, default).map_err(|e| CliError::usage(e.to_string())),
        }
    }

    /// Like [`Settings::value`] for reals, rejecting non-finite values.
    pub fn real(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match flag {
            Some(v) => v,
            None => self.cfg.real_or(key, default).map_err(|e| CliError::usage(e.to_string()))?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::usage(format!("{key} must be finite, got {v}")))
        }
    }

    pub fn optional<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.cfg.get(key).map_err(|e| CliError::usage(e.to_string())),
        }
    }

    /// The gripper from `--gripper D,W,H,T`, else from the four `gripper.*` keys.
    pub fn gripper(&self, flag: Option<&str>) -> Result<GripperParams, CliError> {
        let dims: Vec<f64> = match flag {
            Some(text) => parse_reals(text, 4).map_err(|m| CliError::usage(format!("--gripper: {m}")))?,
            None => {
                let keys = ["gripper.depth", "gripper.width", "gripper.height", "gripper.thickness"];
                let found: Vec<Option<f64>> = keys.iter().map(|k| self.optional(None, k)).collect::<Result<_, _>>()?;
                if found.iter().all(Option::is_none) {
                    return Err(CliError::usage("a gripper is required: pass --gripper D,W,H,T or set gripper.*"));
                }
                keys.iter()
                    .zip(found)
                    .map(|(k, v)| v.ok_or_else(|| CliError::usage(format!("missing {k}"))))
                    .collect::<Result<_, _>>()?
            }
        };
        GripperParams::new(dims[0], dims[1], dims[2], dims[3]).map_err(|e| CliError::usage(e.to_string()))
    }
}

/// Parses exactly `n` comma-separated finite reals.
pub fn parse_reals(text: &str, n: usize) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse '{}' as a number", t.trim())))
        .collect::<Result<_, _>>()?;
    if vals.len() != n {
        return Err(format!("expected {n} comma-separated values, got {}", vals.len()));
    }
    if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
        return Err(format!("value {v} is not finite"));
    }
    Ok(vals)
}

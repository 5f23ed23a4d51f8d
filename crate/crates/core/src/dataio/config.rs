//! Flat `key = value` configuration with `#` comments and dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::read_text;
use crate::error::{Error, Result};

/// Pseudo-path used in errors about command-line overrides.
const OVERRIDE_SOURCE: &str = "--set";

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// Source file line; 0 for overrides.
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    path: PathBuf,
    entries: BTreeMap<String, Entry>,
}

pub fn read_config(path: &Path) -> Result<Config> {
    parse_config(&read_text(path)?, path)
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        })
}

pub fn parse_config(text: &str, path: &Path) -> Result<Config> {
    let mut cfg = Config { path: path.to_path_buf(), entries: BTreeMap::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::parse(path, line, format!("expected 'key = value', found '{content}'")));
        };
        let (k, v) = (k.trim(), v.trim());
        if !valid_key(k) {
            return Err(Error::parse(path, line, format!("invalid key '{k}'")));
        }
        if let Some(prev) = cfg.entries.get(k) {
            return Err(Error::parse(path, line, format!("duplicate key '{k}' (first set on line {})", prev.line)));
        }
        cfg.entries.insert(k.to_string(), Entry { value: v.to_string(), line });
    }
    Ok(cfg)
}

impl Config {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Applies a `key=value` override, replacing any file value.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(Error::parse(OVERRIDE_SOURCE, 0, format!("expected key=value, found '{assignment}'")));
        };
        let k = k.trim();
        if !valid_key(k) {
            return Err(Error::parse(OVERRIDE_SOURCE, 0, format!("invalid key '{k}'")));
        }
        self.entries.insert(k.to_string(), Entry { value: v.trim().to_string(), line: 0 });
        Ok(())
    }

    fn error(&self, entry: &Entry, message: String) -> Error {
        if entry.line == 0 {
            Error::parse(OVERRIDE_SOURCE, 0, message)
        } else {
            Error::parse(&self.path, entry.line, message)
        }
    }

    /// Parse error located on `key`'s line, or line 1 when the key is absent.
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> Error {
        match self.entries.get(key) {
            Some(e) => self.error(e, message.into()),
            None => Error::parse(&self.path, 1, message),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Parses `key` as `T` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .parse()
            .map(Some)
            .map_err(|_| self.error(e, format!("{key}: cannot parse '{}'", e.value)))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Like [`Config::get_or`] for reals, rejecting non-finite values.
    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.get_or(key, default)?;
        if !v.is_finite() {
            let e = &self.entries[key];
            return Err(self.error(e, format!("{key}: value must be finite")));
        }
        Ok(v)
    }

    /// Errors on the first key that is not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, e)) => Err(self.error(e, format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("run.cfg")
    }

    #[test]
    fn parse_examples() {
        assert!(parse_config("", p()).unwrap().is_empty());
        let c = parse_config("# top\npolicy.a = 10.1244\nsampler.n_centers=200 # inline\n\n", p()).unwrap();
        assert_eq!(c.get::<f64>("policy.a").unwrap(), Some(10.1244));
        assert_eq!(c.get_or::<usize>("sampler.n_centers", 5).unwrap(), 200);
        assert_eq!(c.get_or::<usize>("sampler.other", 5).unwrap(), 5);
        assert_eq!(c.keys().collect::<Vec<_>>(), vec!["policy.a", "sampler.n_centers"]);
    }

    #[test]
    fn errors_carry_lines() {
        assert!(matches!(parse_config("a = 1\n\na = 2\n", p()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_config("a = 1\nnovalue\n", p()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("bad key = 1\n", p()), Err(Error::Parse { line: 1, .. })));
        let c = parse_config("x = 1\ny = abc\n", p()).unwrap();
        assert!(matches!(c.get::<f64>("y"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(c.reject_unknown(&["x"]), Err(Error::Parse { line: 2, .. })));
        assert!(c.reject_unknown(&["x", "y"]).is_ok());
        let c = parse_config("z = inf\n", p()).unwrap();
        assert!(c.real_or("z", 0.0).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut c = parse_config("policy.a = 1\n", p()).unwrap();
        c.apply_override("policy.a=2.5").unwrap();
        c.apply_override("policy.b = 0.5").unwrap();
        assert_eq!(c.get::<f64>("policy.a").unwrap(), Some(2.5));
        assert_eq!(c.get::<f64>("policy.b").unwrap(), Some(0.5));
        assert!(c.apply_override("novalue").is_err());
        c.apply_override("k=x").unwrap();
        assert!(matches!(c.get::<f64>("k"), Err(Error::Parse { line: 0, .. })));
    }
}

//! Confidence fields (a `# d_th=<v> width=<v> n=<N>` header, then one value
//! per line) and `x,y` sample tables.

use std::path::Path;

use super::{format_real, parse_real, read_text, write_text};
use crate::confidence::ConfidenceField;
use crate::error::{Error, Result};

pub fn write_confidence(path: &Path, field: &ConfidenceField) -> Result<()> {
    let mut out = format!(
        "# d_th={} width={} n={}\n",
        format_real(field.d_th),
        format_real(field.gripper_width),
        field.len()
    );
    for v in &field.values {
        out.push_str(&format_real(*v));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_confidence(path: &Path) -> Result<ConfidenceField> {
    parse_confidence(&read_text(path)?, path)
}

pub fn parse_confidence(text: &str, path: &Path) -> Result<ConfidenceField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = match lines.next() {
        Some((_, h)) => h.strip_prefix('#').map(str::trim),
        None => None,
    };
    let Some(header) = header else {
        return Err(Error::parse(path, 1, "expected header '# d_th=<v> width=<v> n=<N>'"));
    };
    let (mut d_th, mut width, mut n) = (None, None, None);
    for token in header.split_whitespace() {
        let Some((k, v)) = token.split_once('=') else {
            return Err(Error::parse(path, 1, format!("malformed header token '{token}'")));
        };
        match k {
            "d_th" => d_th = Some(parse_real(path, 1, k, v)?),
            "width" => width = Some(parse_real(path, 1, k, v)?),
            "n" => n = Some(v.parse::<usize>().map_err(|_| Error::parse(path, 1, format!("bad count '{v}'")))?),
            _ => return Err(Error::parse(path, 1, format!("unknown header key '{k}'"))),
        }
    }
    let (Some(d_th), Some(gripper_width), Some(n)) = (d_th, width, n) else {
        return Err(Error::parse(path, 1, "header needs d_th, width and n"));
    };
    let mut values = Vec::with_capacity(n);
    let mut last = 1;
    for (line, l) in lines {
        last = line;
        if l.is_empty() {
            continue;
        }
        let v = parse_real(path, line, "confidence", l)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::parse(path, line, format!("confidence {v} outside [0, 1]")));
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::parse(path, last, format!("header promises {n} values, found {}", values.len())));
    }
    Ok(ConfidenceField { values, d_th, gripper_width })
}

/// Reads a CSV with header `x,y` into two aligned columns.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    parse_xy(&read_text(path)?, path)
}

pub fn parse_xy(text: &str, path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    if lines.next().map(|(_, h)| h) != Some("x,y") {
        return Err(Error::parse(path, 1, "expected header 'x,y'"));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let Some((x, y)) = l.split_once(',') else {
            return Err(Error::parse(path, line, "expected two fields"));
        };
        if y.contains(',') {
            return Err(Error::parse(path, line, "expected two fields"));
        }
        xs.push(parse_real(path, line, "x", x)?);
        ys.push(parse_real(path, line, "y", y)?);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let field = ConfidenceField { values: vec![0.0, 0.761594155955765, 0.123456789012], d_th: 0.01, gripper_width: 0.08 };
        write_confidence(&path, &field).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# d_th=0.01 width=0.08 n=3\n"));
        let back = read_confidence(&path).unwrap();
        assert_eq!((back.d_th, back.gripper_width), (0.01, 0.08));
        for (a, b) in back.values.iter().zip(&field.values) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn count_mismatch_and_bad_header() {
        let p = Path::new("c.txt");
        assert!(matches!(parse_confidence("# d_th=0.01 width=0.08 n=3\n0.1\n0.2\n", p), Err(Error::Parse { line: 3, .. })));
        assert!(parse_confidence("d_th=0.01 width=0.08 n=1\n0.1\n", p).is_err());
        assert!(parse_confidence("# d_th=0.01 n=1\n0.1\n", p).is_err());
        assert!(parse_confidence("# d_th=0.01 width=0.08 n=1\n1.5\n", p).is_err());
        assert!(parse_confidence("", p).is_err());
    }

    #[test]
    fn xy_tables() {
        let p = Path::new("xy.csv");
        assert_eq!(parse_xy("x,y\n0,1\n\n0.5,-2\n", p).unwrap(), (vec![0.0, 0.5], vec![1.0, -2.0]));
        assert!(parse_xy("a,b\n", p).is_err());
        assert!(matches!(parse_xy("x,y\n1,2,3\n", p), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_xy("x,y\n1\n", p), Err(Error::Parse { line: 2, .. })));
    }
}

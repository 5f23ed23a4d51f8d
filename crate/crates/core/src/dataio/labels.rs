//! CSV output of anchor and refine labels.
//!
//! Classes are written as `1` (positive), `0` (negative) and `-1` (ignore);
//! residual columns are empty when the row has no positive.

use std::path::Path;

use super::{format_real, write_text};
use crate::anchors::{AnchorLabel, LabelClass, RefineLabel, ResidualBlock};
use crate::error::{Error, Result};

const RESIDUAL_COLUMNS: [&str; 8] = ["res_cx", "res_cy", "res_cz", "res_rx", "res_ry", "res_rz", "res_theta", "res_sq"];

/// One anchor-labelled positive point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLabelRow {
    /// Index of the positive point in the cloud.
    pub point: usize,
    /// Index of the ground-truth grasp assigned to it.
    pub grasp: usize,
    pub label: AnchorLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineLabelRow {
    pub point: usize,
    pub grasp: usize,
    pub label: RefineLabel,
}

fn class_code(c: LabelClass) -> &'static str {
    match c {
        LabelClass::Positive => "1",
        LabelClass::Negative => "0",
        LabelClass::Ignore => "-1",
    }
}

fn push_residuals(row: &mut Vec<String>, res: Option<&ResidualBlock>) {
    match res {
        Some(r) => row.extend(r.to_array().map(format_real)),
        None => row.extend(std::iter::repeat_n(String::new(), ResidualBlock::LEN)),
    }
}

/// Header `point,grasp,cls_0..cls_{M-1},anchor,res_*`; `anchor` is -1 without a positive.
pub fn write_anchor_labels(path: &Path, rows: &[AnchorLabelRow]) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.label.classes.len());
    if let Some(bad) = rows.iter().find(|r| r.label.classes.len() != m) {
        return Err(Error::LengthMismatch { expected: m, actual: bad.label.classes.len() });
    }
    let mut header: Vec<String> = vec!["point".into(), "grasp".into()];
    header.extend((0..m).map(|i| format!("cls_{i}")));
    header.push("anchor".into());
    header.extend(RESIDUAL_COLUMNS.map(String::from));
    let mut out = header.join(",") + "\n";
    for r in rows {
        let mut row = vec![r.point.to_string(), r.grasp.to_string()];
        row.extend(r.label.classes.iter().map(|c| class_code(*c).to_string()));
        row.push(r.label.positive.map_or("-1".into(), |p| p.index.to_string()));
        push_residuals(&mut row, r.label.positive.as_ref().map(|p| &p.residuals));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Header `point,grasp,class,res_*`.
pub fn write_refine_labels(path: &Path, rows: &[RefineLabelRow]) -> Result<()> {
    let mut out = format!("point,grasp,class,{}\n", RESIDUAL_COLUMNS.join(","));
    for r in rows {
        let mut row = vec![r.point.to_string(), r.grasp.to_string(), class_code(r.label.class).to_string()];
        push_residuals(&mut row, r.label.residuals.as_ref());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::PositiveAnchor;
    use crate::grasp::Vec3;

    #[test]
    fn label_files() {
        let dir = tempfile::tempdir().unwrap();
        let res = ResidualBlock { res_c: Vec3::new(0.1, 0.0, -0.2), res_r: Vec3::zeros(), theta: 0.5, s_q: 0.9 };
        let rows = vec![
            AnchorLabelRow {
                point: 7,
                grasp: 2,
                label: AnchorLabel {
                    classes: vec![LabelClass::Positive, LabelClass::Negative],
                    positive: Some(PositiveAnchor { index: 0, residuals: res }),
                },
            },
            AnchorLabelRow {
                point: 9,
                grasp: 3,
                label: AnchorLabel { classes: vec![LabelClass::Ignore, LabelClass::Ignore], positive: None },
            },
        ];
        let a = dir.path().join("anchors.csv");
        write_anchor_labels(&a, &rows).unwrap();
        assert_eq!(
            std::fs::read_to_string(&a).unwrap(),
            "point,grasp,cls_0,cls_1,anchor,res_cx,res_cy,res_cz,res_rx,res_ry,res_rz,res_theta,res_sq\n\
             7,2,1,0,0,0.1,0,-0.2,0,0,0,0.5,0.9\n\
             9,3,-1,-1,-1,,,,,,,,\n"
        );
        let r = dir.path().join("refine.csv");
        let rows = vec![RefineLabelRow { point: 7, grasp: 2, label: RefineLabel { class: LabelClass::Negative, residuals: None } }];
        write_refine_labels(&r, &rows).unwrap();
        assert!(std::fs::read_to_string(&r).unwrap().ends_with("7,2,0,,,,,,,,\n"));
    }
}

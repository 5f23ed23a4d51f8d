//! Contact extraction for a closing parallel-jaw gripper and the antipodal
//! (force-closure proxy) quality score.

use crate::collision::gripper_volume;
use crate::error::{Error, Result};
use crate::grasp::{grasp_frame, Grasp, GripperParams, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    /// Contact under the +Y finger, world frame.
    pub ci: Vec3,
    /// Contact under the −Y finger, world frame.
    pub cj: Vec3,
    pub ni: Vec3,
    pub nj: Vec3,
    /// `|Y_G(ci) − Y_G(cj)|`, the opening needed to hold both contacts.
    pub spread: f64,
}

/// First points touched by each jaw as it closes inward.
///
/// Among the cloud points inside the closing region, the +Y contact is the one
/// with the largest grasp-frame Y (`y > 0`) and the −Y contact the one with the
/// smallest (`y < 0`); ties go to the lower index. Returns `None` when either
/// side is empty.
pub fn find_contacts(cloud: &PointCloud, g: &Grasp, s: &GripperParams) -> Result<Option<ContactPair>> {
    let normals = cloud.require_normals("contact extraction")?;
    let vol = gripper_volume(s)?;
    let frame = grasp_frame(g);
    let mut pos: Option<(usize, f64)> = None;
    let mut neg: Option<(usize, f64)> = None;
    for (i, p) in cloud.points.iter().enumerate() {
        let q = frame.world_to_grasp(p);
        if !vol.in_closing_region(&q) {
            continue;
        }
        if q.y > 0.0 && pos.is_none_or(|(_, y)| q.y > y) {
            pos = Some((i, q.y));
        } else if q.y < 0.0 && neg.is_none_or(|(_, y)| q.y < y) {
            neg = Some((i, q.y));
        }
    }
    Ok(match (pos, neg) {
        (Some((i, yi)), Some((j, yj))) => Some(ContactPair {
            ci: cloud.points[i],
            cj: cloud.points[j],
            ni: normals[i],
            nj: normals[j],
            spread: yi - yj,
        }),
        _ => None,
    })
}

/// `|cos∠(r, n_i)| · |cos∠(r, n_j)|` with `r` the jaw axis of `g`.
pub fn antipodal_score(pair: &ContactPair, g: &Grasp) -> Result<f64> {
    let r = g.orientation;
    let rn = r.norm();
    let cos = |n: &Vec3| -> Result<f64> {
        let nn = n.norm();
        if !(nn > 0.0) || !(rn > 0.0) {
            return Err(Error::InvalidInput("zero-length vector in antipodal score".into()));
        }
        Ok((r.dot(n) / (rn * nn)).abs().min(1.0))
    };
    Ok(cos(&pair.ni)? * cos(&pair.nj)?)
}

/// Whether the contacts fit between jaws opened to `s.width`.
pub fn width_fit(pair: &ContactPair, s: &GripperParams) -> bool {
    pair.spread <= s.width
}

/// Antipodal score of `g` on `cloud`, or 0 when no contact pair exists.
pub fn grasp_score(cloud: &PointCloud, g: &Grasp, s: &GripperParams) -> Result<f64> {
    match find_contacts(cloud, g, s)? {
        Some(pair) => antipodal_score(&pair, g),
        None => Ok(0.0),
    }
}

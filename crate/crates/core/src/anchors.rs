//! Orientation anchors, anchor labels with residual encoding, and the
//! positive/negative/ignore labels used to refine proposals.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grasp::{all_finite, angle_between, Grasp, ScoredGrasp, Vec3};

/// Default center-residual scale `c_b`.
pub const DEFAULT_CENTER_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    directions: Vec<Vec3>,
}

impl AnchorSet {
    /// Wraps caller-chosen directions after checking they are unit and distinct.
    pub fn from_directions(directions: Vec<Vec3>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidInput("anchor set needs at least one direction".into()));
        }
        for (i, d) in directions.iter().enumerate() {
            if !all_finite(d) || (d.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("anchor {i} is not a unit vector")));
            }
            if directions[..i].iter().any(|e| (e - d).norm() < 1e-12) {
                return Err(Error::InvalidInput(format!("anchor {i} duplicates an earlier anchor")));
            }
        }
        Ok(AnchorSet { directions })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn get(&self, i: usize) -> Option<&Vec3> {
        self.directions.get(i)
    }

    /// Index and angle of the anchor closest in angle to `r`; ties go to the lower index.
    pub fn nearest(&self, r: &Vec3) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, d) in self.directions.iter().enumerate() {
            let a = angle_between(r, d);
            if a < best.1 {
                best = (i, a);
            }
        }
        best
    }
}

/// `M` anchor directions on the unit sphere.
///
/// `M = 4` gives a regular tetrahedron, `M = 1` the world up axis, and any
/// other count a Fibonacci lattice.
pub fn anchor_set(m: usize) -> Result<AnchorSet> {
    let directions = match m {
        0 => return Err(Error::InvalidInput("anchor count must be at least 1".into())),
        1 => vec![Vec3::z()],
        4 => [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)]
            .iter()
            .map(|&(x, y, z)| Vec3::new(x, y, z) / 3f64.sqrt())
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    Vec3::new(rho * phi.cos(), rho * phi.sin(), z).normalize()
                })
                .collect()
        }
    };
    AnchorSet::from_directions(directions)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelClass {
    Positive,
    Negative,
    Ignore,
}

impl LabelClass {
    /// Classification target: 1 for positive, 0 for negative, none for ignore.
    pub fn target(self) -> Option<f64> {
        match self {
            LabelClass::Positive => Some(1.0),
            LabelClass::Negative => Some(0.0),
            LabelClass::Ignore => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelClass::Positive => "positive",
            LabelClass::Negative => "negative",
            LabelClass::Ignore => "ignore",
        }
    }
}

/// Regression targets: center residual (scaled), orientation residual, θ, s_q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBlock {
    pub res_c: Vec3,
    pub res_r: Vec3,
    pub theta: f64,
    pub s_q: f64,
}

impl ResidualBlock {
    pub const LEN: usize = 8;

    pub fn to_array(&self) -> [f64; 8] {
        let (c, r) = (self.res_c, self.res_r);
        [c.x, c.y, c.z, r.x, r.y, r.z, self.theta, self.s_q]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::LEN {
            return Err(Error::LengthMismatch { expected: Self::LEN, actual: v.len() });
        }
        Ok(ResidualBlock {
            res_c: Vec3::new(v[0], v[1], v[2]),
            res_r: Vec3::new(v[3], v[4], v[5]),
            theta: v[6],
            s_q: v[7],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveAnchor {
    pub index: usize,
    pub residuals: ResidualBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLabel {
    pub classes: Vec<LabelClass>,
    /// Present exactly when one anchor is positive.
    pub positive: Option<PositiveAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorThresholds {
    /// The nearest anchor is positive below this angle.
    pub positive: f64,
    /// Anchors at or beyond this angle are negative.
    pub negative: f64,
}

impl Default for AnchorThresholds {
    fn default() -> Self {
        AnchorThresholds { positive: 5.0 * PI / 12.0, negative: 2.0 * PI / 3.0 }
    }
}

impl AnchorThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.positive.is_finite() && self.negative.is_finite() && self.positive <= self.negative) {
            return Err(Error::InvalidInput(format!(
                "anchor thresholds need positive <= negative, got {} and {}",
                self.positive, self.negative
            )));
        }
        Ok(())
    }
}

/// Labels every anchor for the ground-truth grasp `gt` attached to point `p_p`.
pub fn assign_anchor_labels(
    gt: &ScoredGrasp,
    p_p: &Vec3,
    anchors: &AnchorSet,
    thresholds: &AnchorThresholds,
    c_b: f64,
) -> Result<AnchorLabel> {
    thresholds.validate()?;
    let r = gt.grasp.orientation;
    let (best, best_angle) = anchors.nearest(&r);
    let mut classes: Vec<LabelClass> = anchors
        .directions()
        .iter()
        .map(|d| {
            if angle_between(&r, d) >= thresholds.negative {
                LabelClass::Negative
            } else {
                LabelClass::Ignore
            }
        })
        .collect();
    let positive = if best_angle < thresholds.positive {
        classes[best] = LabelClass::Positive;
        Some(PositiveAnchor {
            index: best,
            residuals: encode_residuals(gt, p_p, &anchors.directions()[best], c_b)?,
        })
    } else {
        None
    };
    Ok(AnchorLabel { classes, positive })
}

/// Anchor labels for many (ground truth, positive point) pairs, in input order.
pub fn assign_anchor_labels_batch(
    pairs: &[(ScoredGrasp, Vec3)],
    anchors: &AnchorSet,
    thresholds: &AnchorThresholds,
    c_b: f64,
) -> Result<Vec<AnchorLabel>> {
    pairs
        .par_iter()
        .map(|(gt, p)| assign_anchor_labels(gt, p, anchors, thresholds, c_b))
        .collect()
}

fn check_scale(c_b: f64) -> Result<()> {
    if c_b > 0.0 && c_b.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("center scale c_b must be positive, got {c_b}")))
    }
}

/// Residuals of `gt` relative to positive point `p_p` and anchor direction.
pub fn encode_residuals(gt: &ScoredGrasp, p_p: &Vec3, anchor_dir: &Vec3, c_b: f64) -> Result<ResidualBlock> {
    check_scale(c_b)?;
    let r = gt.grasp.orientation;
    Ok(ResidualBlock {
        res_c: (gt.grasp.center - p_p) / c_b,
        res_r: r / r.norm() - anchor_dir / anchor_dir.norm(),
        theta: gt.grasp.theta,
        s_q: gt.s_q,
    })
}

/// Grasp proposal `(res_c·c_b + p_p, normalize(res_r + anchor), θ)`.
pub fn decode_proposal(
    res_c: &Vec3,
    res_r: &Vec3,
    theta: f64,
    p_p: &Vec3,
    anchor_dir: &Vec3,
    c_b: f64,
) -> Result<Grasp> {
    check_scale(c_b)?;
    let r = res_r + anchor_dir;
    if !(r.norm() > 1e-9) {
        return Err(Error::Domain("decoded orientation is (near) zero".into()));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidInput("decoded theta is not finite".into()));
    }
    Grasp::normalized(res_c * c_b + p_p, r, theta.clamp(-FRAC_PI_2, FRAC_PI_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineThresholds {
    pub d1: f64,
    pub d2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Scale applied to the center residual.
    pub c_b: f64,
}

impl Default for RefineThresholds {
    fn default() -> Self {
        RefineThresholds {
            d1: 0.015,
            d2: 0.02,
            beta1: FRAC_PI_4,
            beta2: FRAC_PI_3,
            gamma1: FRAC_PI_4,
            gamma2: FRAC_PI_3,
            c_b: DEFAULT_CENTER_SCALE,
        }
    }
}

impl RefineThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.d1 < self.d2 && self.beta1 < self.beta2 && self.gamma1 < self.gamma2) {
            return Err(Error::InvalidInput(
                "refine thresholds need d1 < d2, beta1 < beta2 and gamma1 < gamma2".into(),
            ));
        }
        check_scale(self.c_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineLabel {
    pub class: LabelClass,
    /// Present exactly when `class` is positive.
    pub residuals: Option<ResidualBlock>,
}

/// Labels a proposal against its ground truth.
///
/// Positive needs all three of distance, axis angle and θ gap under the low
/// thresholds; any one of them past the high threshold makes it negative.
pub fn assign_refine_labels(gt: &ScoredGrasp, proposal: &ScoredGrasp, t: &RefineThresholds) -> Result<RefineLabel> {
    t.validate()?;
    let (g, p) = (&gt.grasp, &proposal.grasp);
    let dist = (g.center - p.center).norm();
    let angle = angle_between(&g.orientation, &p.orientation);
    let dtheta = (g.theta - p.theta).abs();
    let class = if dist < t.d1 && angle < t.beta1 && dtheta < t.gamma1 {
        LabelClass::Positive
    } else if dist > t.d2 || angle >= t.beta2 || dtheta >= t.gamma2 {
        LabelClass::Negative
    } else {
        LabelClass::Ignore
    };
    let residuals = (class == LabelClass::Positive).then(|| ResidualBlock {
        res_c: (g.center - p.center) / t.c_b,
        res_r: g.orientation / g.orientation.norm() - p.orientation / p.orientation.norm(),
        theta: g.theta - p.theta,
        s_q: gt.s_q - proposal.s_q,
    });
    Ok(RefineLabel { class, residuals })
}

//! Evaluation metrics on a selected grasp set: collision-free rate (CFR),
//! mean antipodal score with and without collision penalty, and center
//! coverage of the ground truth (TCR).

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::collision::CollisionChecker;
use crate::contact::grasp_score;
use crate::error::{Error, Result};
use crate::grasp::{Grasp, GripperParams, PointCloud, ScoredGrasp};
use crate::spatial::KdTree;

pub const DEFAULT_POOL: usize = 1000;
pub const DEFAULT_TOP: usize = 100;
/// Center distance under which a ground-truth grasp counts as covered.
pub const DEFAULT_COVERAGE_RADIUS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub pool: usize,
    pub top: usize,
    pub coverage_radius: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { pool: DEFAULT_POOL, top: DEFAULT_TOP, coverage_radius: DEFAULT_COVERAGE_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub cfr: f64,
    pub as_mean: f64,
    pub as_with_collision: f64,
    pub tcr: f64,
    pub n_selected: usize,
}

const FIELDS: [&str; 5] = ["cfr", "as", "as_wc", "tcr", "n_selected"];

impl EvalReport {
    fn values(&self) -> [String; 5] {
        [
            format!("{:.6}", self.cfr),
            format!("{:.6}", self.as_mean),
            format!("{:.6}", self.as_with_collision),
            format!("{:.6}", self.tcr),
            self.n_selected.to_string(),
        ]
    }

    /// One `key=value` line per field.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in FIELDS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn csv_header() -> String {
        FIELDS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values().join(",")
    }
}

/// Input indices ordered by descending `s_q`, ties by index.
fn rank_by_score(scored: &[ScoredGrasp]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].s_q.total_cmp(&scored[a].s_q).then(a.cmp(&b)));
    order
}

/// Top `pool` grasps by score, minus those colliding with `scene`, cut to `top`.
pub fn select_for_eval(
    scored: &[ScoredGrasp],
    scene: &PointCloud,
    s: &GripperParams,
    pool: usize,
    top: usize,
) -> Result<Vec<ScoredGrasp>> {
    if scored.is_empty() {
        return Err(Error::Empty("grasps to evaluate"));
    }
    if top > pool {
        return Err(Error::InvalidInput(format!("top ({top}) must not exceed pool ({pool})")));
    }
    s.validate()?;
    let mut order = rank_by_score(scored);
    order.truncate(pool);
    let checker = CollisionChecker::new(scene);
    let free: Vec<bool> = order.par_iter().map(|&i| !checker.collides(&scored[i].grasp, s)).collect();
    Ok(order
        .iter()
        .zip(free)
        .filter(|(_, f)| *f)
        .map(|(&i, _)| scored[i])
        .take(top)
        .collect())
}

/// Fraction of `grasps` that do not collide with `scene`.
pub fn cfr(grasps: &[Grasp], scene: &PointCloud, s: &GripperParams) -> Result<f64> {
    if grasps.is_empty() {
        return Err(Error::Empty("grasps for CFR"));
    }
    s.validate()?;
    let checker = CollisionChecker::new(scene);
    let free = grasps.par_iter().filter(|g| !checker.collides(g, s)).count();
    Ok(free as f64 / grasps.len() as f64)
}

/// `(AS, AS w/C)`: mean antipodal score, and the same mean with colliding grasps zeroed.
///
/// Grasps without a contact pair score 0 in both.
pub fn antipodal_metrics(grasps: &[Grasp], scene: &PointCloud, s: &GripperParams) -> Result<(f64, f64)> {
    if grasps.is_empty() {
        return Err(Error::Empty("grasps for antipodal metrics"));
    }
    s.validate()?;
    scene.require_normals("antipodal metrics")?;
    let checker = CollisionChecker::new(scene);
    let per: Vec<(f64, bool)> = grasps
        .par_iter()
        .map(|g| Ok((grasp_score(scene, g, s)?, checker.collides(g, s))))
        .collect::<Result<_>>()?;
    let n = grasps.len() as f64;
    let raw: f64 = per.iter().map(|(v, _)| v).sum();
    let penalized: f64 = per.iter().map(|(v, c)| if *c { 0.0 } else { *v }).sum();
    Ok((raw / n, penalized / n))
}

/// Fraction of ground-truth grasps with a predicted center within `radius` (inclusive).
pub fn coverage_rate(predicted: &[Grasp], ground_truth: &[Grasp], radius: f64) -> Result<f64> {
    if ground_truth.is_empty() {
        return Err(Error::Empty("ground-truth grasps for coverage"));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidInput(format!("coverage radius must be non-negative, got {radius}")));
    }
    let centers: Vec<_> = predicted.iter().map(|g| g.center).collect();
    let tree = KdTree::new(&centers);
    let covered = ground_truth.par_iter().filter(|g| tree.any_within(&g.center, radius)).count();
    Ok(covered as f64 / ground_truth.len() as f64)
}

/// Selects against `scene` and scores the selection against `scene`.
pub fn evaluate(
    scored: &[ScoredGrasp],
    scene: &PointCloud,
    ground_truth: &[Grasp],
    s: &GripperParams,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    evaluate_observed(scored, scene, scene, ground_truth, s, opts)
}

/// Selects against the `observed` cloud, then scores against the full `scene`.
///
/// Using a partial view for selection is what lets CFR drop below 1.
pub fn evaluate_observed(
    scored: &[ScoredGrasp],
    observed: &PointCloud,
    scene: &PointCloud,
    ground_truth: &[Grasp],
    s: &GripperParams,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let selected = select_for_eval(scored, observed, s, opts.pool, opts.top)?;
    if selected.is_empty() {
        return Err(Error::Empty("collision-free grasps after selection"));
    }
    let grasps: Vec<Grasp> = selected.iter().map(|g| g.grasp).collect();
    let (as_mean, as_with_collision) = antipodal_metrics(&grasps, scene, s)?;
    Ok(EvalReport {
        cfr: cfr(&grasps, scene, s)?,
        as_mean,
        as_with_collision,
        tcr: coverage_rate(&grasps, ground_truth, opts.coverage_radius)?,
        n_selected: grasps.len(),
    })
}

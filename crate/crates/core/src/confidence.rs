//! Point grasp confidence: `c_p = tanh Σ_g max(0, 1 − ‖p − c_g‖ / d_th)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grasp::{Grasp, PointCloud};
use crate::spatial::KdTree;

/// Default distance threshold `d_th`, in meters.
pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceField {
    /// One value in [0, 1) per cloud point, aligned by index.
    pub values: Vec<f64>,
    pub d_th: f64,
    /// Gripper width whose grasp set produced this field.
    pub gripper_width: f64,
}

impl ConfidenceField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Confidence of every cloud point given the grasp set of one gripper width.
///
/// Only grasp centers matter; `gripper_width` is recorded on the field.
pub fn point_confidence(
    cloud: &PointCloud,
    grasps: &[Grasp],
    d_th: f64,
    gripper_width: f64,
) -> Result<ConfidenceField> {
    if !(d_th > 0.0 && d_th.is_finite()) {
        return Err(Error::InvalidInput(format!("d_th must be positive, got {d_th}")));
    }
    let centers: Vec<_> = grasps.iter().map(|g| g.center).collect();
    let tree = KdTree::new(&centers);
    let values = cloud
        .points
        .par_iter()
        .map(|p| {
            // Ascending grasp order keeps the sum independent of tree layout.
            let sum: f64 = tree
                .within_radius(p, d_th)
                .into_iter()
                .map(|i| (1.0 - (p - centers[i]).norm() / d_th).max(0.0))
                .sum();
            sum.tanh()
        })
        .collect();
    Ok(ConfidenceField {
        values,
        d_th,
        gripper_width,
    })
}

/// Indices of the `k1` highest-confidence points; ties by lower index.
pub fn select_positive_points(field: &ConfidenceField, k1: usize) -> Result<Vec<usize>> {
    if k1 > field.len() {
        return Err(Error::InvalidInput(format!(
            "cannot select {k1} positive points from a field of {}",
            field.len()
        )));
    }
    let mut order: Vec<usize> = (0..field.len()).collect();
    let by_value = |a: &usize, b: &usize| field.values[*b].total_cmp(&field.values[*a]).then(a.cmp(b));
    if k1 < order.len() && k1 > 0 {
        order.select_nth_unstable_by(k1 - 1, by_value);
        order.truncate(k1);
    }
    order.sort_by(by_value);
    order.truncate(k1);
    Ok(order)
}

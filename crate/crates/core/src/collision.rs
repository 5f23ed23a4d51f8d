//! Box model of a parallel-jaw gripper, collision checks against point
//! clouds, and extraction of the points between the fingers.
//!
//! Everything is expressed in the grasp frame: the closing region is centered
//! on the origin, the fingers flank it along ±Y and the back plate sits
//! behind it along −X (the gripper approaches along +X).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grasp::{grasp_frame, Grasp, GripperParams, PointCloud, Vec3};
use crate::sampling::{resample_to_fixed, seeded_rng};
use crate::spatial::KdTree;

/// Points within this distance of a box face count as on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Box3 {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Box3 { min, max }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        self.extent().product()
    }

    /// Inside or on the boundary (within `tol`).
    pub fn contains_closed(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    /// Strictly inside, more than `tol` away from every face.
    pub fn contains_strict(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] > self.min[i] + tol && p[i] < self.max[i] - tol)
    }

    /// Largest distance from the origin to any corner.
    pub fn max_corner_norm(&self) -> f64 {
        let far = Vec3::from_fn(|i, _| self.min[i].abs().max(self.max[i].abs()));
        far.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperVolume {
    pub closing: Box3,
    pub finger_pos: Box3,
    pub finger_neg: Box3,
    pub back: Box3,
}

impl GripperVolume {
    fn from_params(s: &GripperParams) -> Self {
        let (hd, hw, hh, t) = (s.depth / 2.0, s.width / 2.0, s.height / 2.0, s.thickness);
        GripperVolume {
            closing: Box3::new(Vec3::new(-hd, -hw, -hh), Vec3::new(hd, hw, hh)),
            finger_pos: Box3::new(Vec3::new(-hd, hw, -hh), Vec3::new(hd, hw + t, hh)),
            finger_neg: Box3::new(Vec3::new(-hd, -hw - t, -hh), Vec3::new(hd, -hw, hh)),
            back: Box3::new(Vec3::new(-hd - t, -hw - t, -hh), Vec3::new(-hd, hw + t, hh)),
        }
    }

    /// Whether a grasp-frame point is strictly inside a finger or the back plate.
    pub fn collides_local(&self, q: &Vec3) -> bool {
        [&self.finger_pos, &self.finger_neg, &self.back]
            .iter()
            .any(|b| b.contains_strict(q, BOUNDARY_TOLERANCE))
    }

    pub fn in_closing_region(&self, q: &Vec3) -> bool {
        self.closing.contains_closed(q, BOUNDARY_TOLERANCE)
    }

    /// Radius of a ball about the grasp center that encloses every box.
    pub fn bounding_radius(&self) -> f64 {
        [&self.closing, &self.finger_pos, &self.finger_neg, &self.back]
            .iter()
            .map(|b| b.max_corner_norm())
            .fold(0.0, f64::max)
    }
}

pub fn gripper_volume(s: &GripperParams) -> Result<GripperVolume> {
    s.validate()?;
    Ok(GripperVolume::from_params(s))
}

/// Scans every point of `cloud`. See [`CollisionChecker`] for repeated queries.
pub fn check_collision(cloud: &PointCloud, g: &Grasp, s: &GripperParams) -> bool {
    let vol = GripperVolume::from_params(s);
    let frame = grasp_frame(g);
    cloud
        .points
        .iter()
        .any(|p| vol.collides_local(&frame.world_to_grasp(p)))
}

/// Scene wrapper that prefilters points with a k-d tree before the box tests.
#[derive(Debug, Clone)]
pub struct CollisionChecker {
    points: Vec<Vec3>,
    tree: KdTree,
}

impl CollisionChecker {
    pub fn new(scene: &PointCloud) -> Self {
        CollisionChecker {
            points: scene.points.clone(),
            tree: KdTree::new(&scene.points),
        }
    }

    pub fn collides(&self, g: &Grasp, s: &GripperParams) -> bool {
        let vol = GripperVolume::from_params(s);
        let frame = grasp_frame(g);
        // Pad the query radius so boundary round-off cannot drop a candidate.
        let radius = vol.bounding_radius() * (1.0 + 1e-9) + BOUNDARY_TOLERANCE;
        self.tree
            .within_radius(&g.center, radius)
            .into_iter()
            .any(|i| vol.collides_local(&frame.world_to_grasp(&self.points[i])))
    }
}

/// Candidates that do not collide with `scene`, in their original order.
pub fn filter_collision_free(candidates: &[Grasp], scene: &PointCloud, s: &GripperParams) -> Vec<Grasp> {
    if scene.is_empty() {
        return candidates.to_vec();
    }
    let checker = CollisionChecker::new(scene);
    let keep: Vec<bool> = candidates.par_iter().map(|g| !checker.collides(g, s)).collect();
    candidates
        .iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(*g))
        .collect()
}

/// Indices of the cloud points inside the closing region, ascending.
pub fn closing_region_indices(cloud: &PointCloud, g: &Grasp, s: &GripperParams) -> Vec<usize> {
    let vol = GripperVolume::from_params(s);
    let frame = grasp_frame(g);
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| vol.in_closing_region(&frame.world_to_grasp(p)))
        .map(|(i, _)| i)
        .collect()
}

/// Closing-region points in grasp-frame coordinates, resampled to a fixed count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosingRegion {
    pub points: Vec<Vec3>,
    pub indices: Vec<usize>,
    pub padded: bool,
}

pub fn closing_region_points(
    cloud: &PointCloud,
    g: &Grasp,
    s: &GripperParams,
    keep: usize,
    seed: u64,
) -> Result<ClosingRegion> {
    if keep == 0 {
        return Err(Error::InvalidInput("closing region must keep at least one point".into()));
    }
    let inside = closing_region_indices(cloud, g, s);
    if inside.is_empty() {
        return Err(Error::EmptyRegion("no points inside the gripper closing region".into()));
    }
    let sample = resample_to_fixed(inside, keep, &mut seeded_rng(seed));
    let frame = grasp_frame(g);
    Ok(ClosingRegion {
        points: sample
            .indices
            .iter()
            .map(|&i| frame.world_to_grasp(&cloud.points[i]))
            .collect(),
        indices: sample.indices,
        padded: sample.padded,
    })
}

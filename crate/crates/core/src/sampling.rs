//! Normal estimation, Darboux frames, object-level grasp candidate
//! generation, ball query and farthest point sampling.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grasp::{approach_angle, Grasp, GripperParams, PointCloud, Vec3};
use crate::spatial::KdTree;

/// Camera position used to orient normals when none is given.
pub const DEFAULT_VIEWPOINT: Vec3 = Vec3::new(0.0, 0.0, 10.0);

/// Relative eigenvalue floor under which a covariance direction counts as rank-deficient.
const RANK_EPS: f64 = 1e-12;

/// Deterministic RNG used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Surface frame at a point: unit normal plus principal tangent directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxFrame {
    pub point: Vec3,
    pub normal: Vec3,
    /// Direction of least curvature (largest surface extent).
    pub major: Vec3,
    pub minor: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub n_centers: usize,
    /// Jaw-axis rotations about the approach vector, evenly spaced over [0, π).
    pub n_orientation_perturbations: usize,
    /// Approach-angle offsets, evenly spaced over ±`angle_range`.
    pub n_angle_perturbations: usize,
    pub angle_range: f64,
    /// Neighbourhood size for the Darboux frame.
    pub neighbors: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_centers: 2000,
            n_orientation_perturbations: 4,
            n_angle_perturbations: 3,
            angle_range: FRAC_PI_6,
            neighbors: 16,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_centers == 0 || self.n_orientation_perturbations == 0 || self.n_angle_perturbations == 0 {
            return Err(Error::InvalidInput("sampler counts must be at least 1".into()));
        }
        if !(self.angle_range > 0.0 && self.angle_range <= FRAC_PI_2) {
            return Err(Error::InvalidInput(format!(
                "angle_range {} outside (0, pi/2]",
                self.angle_range
            )));
        }
        if self.neighbors < 4 {
            return Err(Error::InvalidInput("Darboux frames need at least 4 neighbors".into()));
        }
        Ok(())
    }
}

struct Eigen3 {
    /// Ascending.
    values: [f64; 3],
    vectors: [Vec3; 3],
}

fn sorted_eigen(m: Matrix3<f64>) -> Eigen3 {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Eigen3 {
        values: order.map(|i| eig.eigenvalues[i]),
        vectors: order.map(|i| eig.eigenvectors.column(i).into_owned()),
    }
}

fn covariance(points: &[Vec3], neighbors: &[usize]) -> Matrix3<f64> {
    let n = neighbors.len() as f64;
    let mean = neighbors.iter().map(|&i| points[i]).sum::<Vec3>() / n;
    neighbors.iter().fold(Matrix3::zeros(), |acc, &i| {
        let d = points[i] - mean;
        acc + d * d.transpose()
    })
}

/// Smallest-eigenvalue direction of a neighbourhood, or `None` when rank < 2.
fn plane_normal(points: &[Vec3], neighbors: &[usize]) -> Option<Vec3> {
    let eig = sorted_eigen(covariance(points, neighbors));
    let top = eig.values[2];
    if !(top > 0.0) || eig.values[1] <= RANK_EPS * top {
        return None;
    }
    Some(eig.vectors[0].normalize())
}

fn orient_toward(n: Vec3, point: &Vec3, viewpoint: &Vec3) -> Vec3 {
    if n.dot(&(viewpoint - point)) < 0.0 {
        -n
    } else {
        n
    }
}

/// PCA normals from the `k` nearest neighbours, flipped toward [`DEFAULT_VIEWPOINT`].
/// `None` marks points whose neighbourhood has rank < 2.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<Vec<Option<Vec3>>> {
    estimate_normals_from(cloud, k, &DEFAULT_VIEWPOINT)
}

pub fn estimate_normals_from(
    cloud: &PointCloud,
    k: usize,
    viewpoint: &Vec3,
) -> Result<Vec<Option<Vec3>>> {
    if k < 3 {
        return Err(Error::InvalidInput(format!("normal estimation needs k >= 3, got {k}")));
    }
    if cloud.len() < k {
        return Err(Error::InvalidInput(format!(
            "cloud has {} points, fewer than k = {k}",
            cloud.len()
        )));
    }
    let tree = KdTree::new(&cloud.points);
    Ok(cloud
        .points
        .par_iter()
        .map(|p| {
            let nbrs: Vec<usize> = tree.nearest(p, k).into_iter().map(|(i, _)| i).collect();
            plane_normal(&cloud.points, &nbrs).map(|n| orient_toward(n, p, viewpoint))
        })
        .collect())
}

/// Estimates normals and attaches them to a copy of `cloud`. Points with a
/// degenerate neighbourhood get the unit direction toward the viewpoint;
/// their count is returned alongside.
pub fn attach_normals(cloud: &PointCloud, k: usize) -> Result<(PointCloud, usize)> {
    let est = estimate_normals(cloud, k)?;
    let mut invalid = 0;
    let normals = est
        .into_iter()
        .zip(&cloud.points)
        .map(|(n, p)| {
            n.unwrap_or_else(|| {
                invalid += 1;
                (DEFAULT_VIEWPOINT - p).try_normalize(0.0).unwrap_or(Vec3::z())
            })
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok((out, invalid))
}

/// Darboux frame at `cloud.points[index]` from its `k` nearest neighbours.
///
/// The normal comes from the cloud when present, otherwise from PCA. The
/// tangent directions are the eigenvectors of the tangent-projected
/// covariance of the neighbours' normals: `major` is the direction along
/// which the normal varies least. If that covariance is isotropic (e.g. a
/// plane) the position covariance decides instead, `major` taking the
/// larger spread.
pub fn darboux_frame(cloud: &PointCloud, index: usize, k: usize) -> Result<DarbouxFrame> {
    if k < 4 {
        return Err(Error::InvalidInput(format!("Darboux frames need k >= 4, got {k}")));
    }
    if index >= cloud.len() {
        return Err(Error::InvalidInput(format!("point index {index} out of range")));
    }
    if cloud.len() < k {
        return Err(Error::InvalidInput(format!(
            "cloud has {} points, fewer than k = {k}",
            cloud.len()
        )));
    }
    let tree = KdTree::new(&cloud.points);
    darboux_frame_with(cloud, &tree, index, k)
}

fn darboux_frame_with(cloud: &PointCloud, tree: &KdTree, index: usize, k: usize) -> Result<DarbouxFrame> {
    let p = cloud.points[index];
    let nbrs: Vec<usize> = tree.nearest(&p, k).into_iter().map(|(i, _)| i).collect();
    let degenerate = || Error::DegenerateNeighborhood { index };

    let normal = match &cloud.normals {
        Some(ns) => ns[index].normalize(),
        None => orient_toward(
            plane_normal(&cloud.points, &nbrs).ok_or_else(degenerate)?,
            &p,
            &DEFAULT_VIEWPOINT,
        ),
    };
    let neighbor_normals: Vec<Vec3> = match &cloud.normals {
        Some(ns) => nbrs.iter().map(|&i| ns[i]).collect(),
        None => nbrs
            .iter()
            .map(|&i| {
                let local: Vec<usize> = tree.nearest(&cloud.points[i], k).into_iter().map(|(j, _)| j).collect();
                plane_normal(&cloud.points, &local).unwrap_or(normal)
            })
            .collect(),
    };

    let proj = Matrix3::identity() - normal * normal.transpose();
    let variation = neighbor_normals
        .iter()
        .fold(Matrix3::zeros(), |acc, n| acc + n * n.transpose());
    let major = match tangent_axes(&(proj * variation * proj), &normal) {
        // Larger normal variation means higher curvature, so `major` takes the smaller one.
        Some((low, _)) => low,
        None => {
            let spread = proj * covariance(&cloud.points, &nbrs) * proj;
            tangent_axes(&spread, &normal)
                .map(|(_, high)| high)
                .unwrap_or_else(|| any_tangent(&normal))
        }
    };
    // Gram-Schmidt against the normal; minor completes a right-handed frame.
    let major = (major - normal * normal.dot(&major)).normalize();
    Ok(DarbouxFrame {
        point: p,
        normal,
        major,
        minor: normal.cross(&major),
    })
}

/// Tangent eigenvectors of a matrix already projected onto the plane ⊥ `normal`,
/// as (smaller-eigenvalue, larger-eigenvalue). `None` when the two are indistinct.
fn tangent_axes(m: &Matrix3<f64>, normal: &Vec3) -> Option<(Vec3, Vec3)> {
    let eig = sorted_eigen(*m);
    // Drop the eigenvector best aligned with the normal (eigenvalue ≈ 0 after projection).
    let drop = (0..3)
        .max_by(|&a, &b| {
            eig.vectors[a]
                .dot(normal)
                .abs()
                .total_cmp(&eig.vectors[b].dot(normal).abs())
        })
        .expect("three eigenvectors");
    let keep: Vec<usize> = (0..3).filter(|&i| i != drop).collect();
    let (lo, hi) = (keep[0], keep[1]);
    let scale = eig.values[hi].abs().max(m.amax());
    if !(scale > 0.0) || eig.values[hi] - eig.values[lo] <= 1e-9 * scale {
        return None;
    }
    Some((eig.vectors[lo], eig.vectors[hi]))
}

fn any_tangent(normal: &Vec3) -> Vec3 {
    let seed = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (seed - normal * normal.dot(&seed)).normalize()
}

/// Generates `n_centers × n_orientation_perturbations × n_angle_perturbations`
/// candidates around Darboux frames of randomly chosen surface points.
///
/// Each candidate approaches along the inward normal with its center just
/// under `D/2` below the surface, so the surface point sits a hair inside
/// the closing region, clear of the back plate. Jaw axes are the Darboux
/// `major` direction rotated about the approach by `jπ/n`; approach angles
/// are offset from the unperturbed one by an even grid over ±`angle_range`
/// and clamped to [−π/2, π/2].
/// Centers whose neighbourhood is degenerate are skipped.
pub fn sample_candidates(
    object_cloud: &PointCloud,
    gripper: &GripperParams,
    cfg: &SamplerConfig,
) -> Result<Vec<Grasp>> {
    cfg.validate()?;
    gripper.validate()?;
    if object_cloud.is_empty() {
        return Ok(Vec::new());
    }
    object_cloud.require_normals("candidate sampling")?;
    let n = object_cloud.len();
    let k = cfg.neighbors.min(n);
    if k < 4 {
        return Err(Error::InvalidInput(format!("cloud of {n} points is too small for Darboux frames")));
    }
    let mut rng = seeded_rng(cfg.rng_seed);
    let centers: Vec<usize> = if cfg.n_centers <= n {
        index::sample(&mut rng, n, cfg.n_centers).into_vec()
    } else {
        (0..cfg.n_centers).map(|_| rng.gen_range(0..n)).collect()
    };

    let tree = KdTree::new(&object_cloud.points);
    let offsets: Vec<f64> = if cfg.n_angle_perturbations == 1 {
        vec![0.0]
    } else {
        let m = (cfg.n_angle_perturbations - 1) as f64;
        (0..cfg.n_angle_perturbations)
            .map(|l| -cfg.angle_range + 2.0 * cfg.angle_range * l as f64 / m)
            .collect()
    };

    let per_center: Vec<Vec<Grasp>> = centers
        .par_iter()
        .map(|&idx| match darboux_frame_with(object_cloud, &tree, idx, k) {
            Ok(frame) => candidates_for_frame(&frame, gripper, cfg.n_orientation_perturbations, &offsets),
            Err(e) => {
                log::warn!("skipping sample center {idx}: {e}");
                Vec::new()
            }
        })
        .collect();
    Ok(per_center.into_iter().flatten().collect())
}

/// Fraction of `D/2` by which the seed point is kept off the back-plate face.
/// Exactly on the face, any rounding (e.g. a text round trip) could push it
/// into the plate and flip the collision test.
const SEED_CLEARANCE: f64 = 1e-5;

fn candidates_for_frame(
    frame: &DarbouxFrame,
    gripper: &GripperParams,
    n_orient: usize,
    offsets: &[f64],
) -> Vec<Grasp> {
    let approach = -frame.normal;
    let center = frame.point + approach * (gripper.depth / 2.0 * (1.0 - SEED_CLEARANCE));
    let side = approach.cross(&frame.major);
    let mut out = Vec::with_capacity(n_orient * offsets.len());
    for j in 0..n_orient {
        let phi = PI * j as f64 / n_orient as f64;
        let (s, c) = phi.sin_cos();
        let mut r = (frame.major * c + side * s).normalize();
        let mut theta = approach_angle(&r, &approach);
        if theta.abs() > FRAC_PI_2 {
            // The jaw is symmetric: flipping r maps θ to π − θ.
            r = -r;
            theta = approach_angle(&r, &approach);
        }
        for delta in offsets {
            let t = (theta + delta).clamp(-FRAC_PI_2, FRAC_PI_2);
            out.push(Grasp {
                center,
                orientation: r,
                theta: t,
            });
        }
    }
    out
}

/// A fixed-size index sample, with `padded` set when indices were repeated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSample {
    pub indices: Vec<usize>,
    pub padded: bool,
}

/// Brings `indices` to exactly `keep` entries: a sorted uniform subsample
/// without replacement when there are too many, or the originals followed by
/// draws with replacement when there are too few.
pub fn resample_to_fixed(indices: Vec<usize>, keep: usize, rng: &mut impl Rng) -> RegionSample {
    let n = indices.len();
    debug_assert!(n > 0 && keep > 0);
    if n > keep {
        let mut picked: Vec<usize> = index::sample(rng, n, keep).into_iter().map(|i| indices[i]).collect();
        picked.sort_unstable();
        RegionSample {
            indices: picked,
            padded: false,
        }
    } else if n < keep {
        let mut out = indices.clone();
        out.extend((n..keep).map(|_| indices[rng.gen_range(0..n)]));
        RegionSample {
            indices: out,
            padded: true,
        }
    } else {
        RegionSample {
            indices,
            padded: false,
        }
    }
}

/// All points within `radius` of `center`, brought to exactly `keep` indices.
pub fn ball_query(tree: &KdTree, center: &Vec3, radius: f64, keep: usize, seed: u64) -> Result<RegionSample> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
    }
    if keep == 0 {
        return Err(Error::InvalidInput("ball query must keep at least one point".into()));
    }
    let found = tree.within_radius(center, radius);
    if found.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no point within {radius} m of ({}, {}, {})",
            center.x, center.y, center.z
        )));
    }
    Ok(resample_to_fixed(found, keep, &mut seeded_rng(seed)))
}

/// `n` points drawn without replacement, kept in input order; the whole cloud when `n >= len`.
pub fn random_subsample(cloud: &PointCloud, n: usize, seed: u64) -> PointCloud {
    if n >= cloud.len() {
        return cloud.clone();
    }
    let mut keep = index::sample(&mut seeded_rng(seed), cloud.len(), n).into_vec();
    keep.sort_unstable();
    cloud.select(&keep)
}

/// Greedy max-min subsampling starting at `start`; ties go to the lowest index.
pub fn farthest_point_sampling(points: &[Vec3], k: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("FPS needs 1 <= k <= {n}, got {k}")));
    }
    if start >= n {
        return Err(Error::InvalidInput(format!("FPS start index {start} out of range")));
    }
    let mut selected = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = start;
    for _ in 0..k {
        selected.push(current);
        let c = points[current];
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, d) in min_d2.iter_mut().enumerate() {
            let d2 = (points[i] - c).norm_squared();
            if d2 < *d {
                *d = d2;
            }
            if *d > best.1 {
                best = (i, *d);
            }
        }
        current = best.0;
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::grasp_frame;
    use rand::Rng;

    fn plane(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded_rng(seed);
        PointCloud::from_points(
            (0..n)
                .map(|_| Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), 0.0))
                .collect(),
        )
    }

    fn fibonacci_sphere(n: usize, radius: f64) -> Vec<Vec3> {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
            })
            .collect()
    }

    #[test]
    fn plane_normals_point_up() {
        let normals = estimate_normals(&plane(1000, 1), 8).unwrap();
        for n in normals {
            let n = n.expect("valid normal");
            assert!((n - Vec3::z()).norm() < 1e-9);
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let pts = fibonacci_sphere(2000, 1.0);
        let cloud = PointCloud::from_points(pts.clone());
        let normals = estimate_normals(&cloud, 16).unwrap();
        let cos5 = 5f64.to_radians().cos();
        let good = normals
            .iter()
            .zip(&pts)
            .filter(|(n, p)| n.is_some_and(|n| n.dot(&p.normalize()).abs() >= cos5))
            .count();
        assert!(good as f64 >= 0.95 * pts.len() as f64, "{good} / {}", pts.len());
    }

    #[test]
    fn collinear_points_are_invalid() {
        let cloud = PointCloud::from_points(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0]);
        let normals = estimate_normals(&cloud, 3).unwrap();
        assert!(normals.iter().all(Option::is_none));
    }

    #[test]
    fn normal_estimation_rejects_small_k() {
        assert!(estimate_normals(&plane(10, 0), 2).is_err());
        assert!(estimate_normals(&plane(2, 0), 3).is_err());
    }

    #[test]
    fn plane_darboux_frame() {
        let f = darboux_frame(&plane(500, 2), 0, 16).unwrap();
        assert!((f.normal - Vec3::z()).norm() < 1e-9);
        assert!(f.major.z.abs() < 1e-9 && f.minor.z.abs() < 1e-9);
        assert!(f.major.dot(&f.minor).abs() < 1e-6);
    }

    #[test]
    fn cylinder_major_follows_axis() {
        let mut rng = seeded_rng(5);
        let radius = 0.03;
        let (pts, normals): (Vec<Vec3>, Vec<Vec3>) = (0..8000)
            .map(|_| {
                let t: f64 = rng.gen_range(0.0..2.0 * PI);
                let z: f64 = rng.gen_range(-0.1..0.1);
                (Vec3::new(radius * t.cos(), radius * t.sin(), z), Vec3::new(t.cos(), t.sin(), 0.0))
            })
            .unzip();
        let cloud = PointCloud::with_normals(pts.clone(), normals).unwrap();
        let tree = KdTree::new(&cloud.points);
        let cos10 = 10f64.to_radians().cos();
        for i in (0..8000).step_by(97) {
            if pts[i].z.abs() > 0.08 {
                continue;
            }
            let f = darboux_frame_with(&cloud, &tree, i, 16).unwrap();
            assert!(f.major.z.abs() >= cos10, "major {:?} at point {i}", f.major);
        }
    }

    #[test]
    fn darboux_without_normals_on_collinear_points_fails() {
        let cloud = PointCloud::from_points((0..6).map(|i| Vec3::x() * i as f64).collect());
        assert!(matches!(
            darboux_frame(&cloud, 0, 4),
            Err(Error::DegenerateNeighborhood { index: 0 })
        ));
    }

    fn gripper() -> GripperParams {
        GripperParams::new(0.06, 0.08, 0.02, 0.01).unwrap()
    }

    fn plane_with_normals() -> PointCloud {
        let p = plane(400, 9);
        let n = vec![Vec3::z(); p.len()];
        PointCloud::with_normals(p.points, n).unwrap()
    }

    #[test]
    fn single_candidate_approaches_against_normal() {
        let cfg = SamplerConfig {
            n_centers: 1,
            n_orientation_perturbations: 1,
            n_angle_perturbations: 1,
            ..SamplerConfig::default()
        };
        let out = sample_candidates(&plane_with_normals(), &gripper(), &cfg).unwrap();
        assert_eq!(out.len(), 1);
        let f = grasp_frame(&out[0]);
        assert!(f.approach().dot(&Vec3::z()) < 0.0);
        assert!((f.approach() + Vec3::z()).norm() < 1e-9);
    }

    #[test]
    fn candidate_count_and_determinism() {
        let cfg = SamplerConfig {
            n_centers: 10,
            n_orientation_perturbations: 4,
            n_angle_perturbations: 3,
            rng_seed: 42,
            ..SamplerConfig::default()
        };
        let cloud = plane_with_normals();
        let a = sample_candidates(&cloud, &gripper(), &cfg).unwrap();
        let b = sample_candidates(&cloud, &gripper(), &cfg).unwrap();
        assert_eq!(a.len(), 120);
        assert_eq!(a, b);
        for g in &a {
            g.validate().unwrap();
        }
    }

    #[test]
    fn empty_cloud_gives_no_candidates() {
        let out = sample_candidates(&PointCloud::default(), &gripper(), &SamplerConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ball_query_pads_isolated_point() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let tree = KdTree::new(&pts);
        let r = ball_query(&tree, &Vec3::new(1.0, 0.0, 0.0), 1e-6, 256, 0).unwrap();
        assert!(r.padded);
        assert_eq!(r.indices, vec![1; 256]);
    }

    #[test]
    fn ball_query_covering_radius_is_permutation() {
        let pts = plane(300, 3).points;
        let tree = KdTree::new(&pts);
        let r = ball_query(&tree, &Vec3::zeros(), 10.0, 300, 7).unwrap();
        assert!(!r.padded);
        let mut idx = r.indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn subsample_keeps_order_and_is_seeded() {
        let cloud = plane(500, 2);
        let a = random_subsample(&cloud, 100, 3);
        assert_eq!(a.len(), 100);
        assert_eq!(a, random_subsample(&cloud, 100, 3));
        assert_ne!(a, random_subsample(&cloud, 100, 4));
        let pos: Vec<usize> = a.points.iter().map(|p| cloud.points.iter().position(|q| q == p).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(random_subsample(&cloud, 900, 3), cloud);
    }

    #[test]
    fn ball_query_errors() {
        let pts = plane(50, 3).points;
        let tree = KdTree::new(&pts);
        assert!(matches!(
            ball_query(&tree, &Vec3::new(5.0, 5.0, 5.0), 0.02, 256, 0),
            Err(Error::EmptyRegion(_))
        ));
        assert!(ball_query(&tree, &Vec3::zeros(), 0.0, 256, 0).is_err());
        assert!(ball_query(&tree, &Vec3::zeros(), 0.1, 0, 0).is_err());
    }

    #[test]
    fn ball_query_agrees_with_brute_force() {
        let pts = plane(3000, 4).points;
        let tree = KdTree::new(&pts);
        let mut rng = seeded_rng(8);
        for q in 0..100 {
            let c = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.01..0.01));
            let radius = 0.02;
            let brute: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - c).norm() <= radius).collect();
            match ball_query(&tree, &c, radius, 256, q) {
                Ok(r) => {
                    assert!(r.indices.iter().all(|i| brute.binary_search(i).is_ok()));
                    if brute.len() <= 256 {
                        let mut uniq = r.indices.clone();
                        uniq.sort_unstable();
                        uniq.dedup();
                        assert_eq!(uniq, brute);
                    }
                }
                Err(_) => assert!(brute.is_empty()),
            }
        }
    }

    #[test]
    fn fps_square_picks_diagonal() {
        let sq = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(farthest_point_sampling(&sq, 2, 0).unwrap(), vec![0, 2]);
        let mut all = farthest_point_sampling(&sq, 4, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(farthest_point_sampling(&sq, 5, 0).is_err());
        assert!(farthest_point_sampling(&sq, 0, 0).is_err());
    }

    #[test]
    fn fps_max_min_property() {
        let pts = plane(400, 6).points;
        let sel = farthest_point_sampling(&pts, 40, 0).unwrap();
        for step in 1..sel.len() {
            let chosen = &sel[..step];
            let dist = |i: usize| chosen.iter().map(|&j| (pts[i] - pts[j]).norm_squared()).fold(f64::INFINITY, f64::min);
            let best = (0..pts.len()).map(dist).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(dist(sel[step]), best);
        }
    }

    #[test]
    fn fps_min_pairwise_distance_non_increasing() {
        let pts = plane(300, 12).points;
        let sel = farthest_point_sampling(&pts, 60, 5).unwrap();
        let mut prev = f64::INFINITY;
        for k in 2..=sel.len() {
            let s = &sel[..k];
            let mut m = f64::INFINITY;
            for a in 0..k {
                for b in a + 1..k {
                    m = m.min((pts[s[a]] - pts[s[b]]).norm());
                }
            }
            assert!(m <= prev + 1e-15);
            prev = m;
        }
    }
}

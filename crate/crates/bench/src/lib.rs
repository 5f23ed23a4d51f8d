//! Synthetic scenes shared by the benchmarks.

use std::f64::consts::PI;

use grasplab::{Grasp, PointCloud, Vec3};

/// Fibonacci-sphere points with outward normals.
pub fn sphere(n: usize, radius: f64, center: Vec3) -> PointCloud {
    let golden = PI * (3.0 - 5f64.sqrt());
    let normals: Vec<Vec3> = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    let points = normals.iter().map(|u| center + u * radius).collect();
    PointCloud::with_normals(points, normals).expect("matching lengths")
}

/// A sphere resting on a square table patch, roughly what a depth camera
/// sees of a single object. Table points carry +Z normals.
pub fn tabletop(object_points: usize, table_side: usize) -> PointCloud {
    let object = sphere(object_points, 0.03, Vec3::new(0.0, 0.0, 0.03));
    let mut points = object.points;
    let mut normals = object.normals.expect("sphere has normals");
    let step = 0.2 / table_side as f64;
    for i in 0..table_side {
        for j in 0..table_side {
            points.push(Vec3::new(-0.1 + i as f64 * step, -0.1 + j as f64 * step, 0.0));
            normals.push(Vec3::z());
        }
    }
    PointCloud::with_normals(points, normals).expect("matching lengths")
}

/// Grasps at evenly spread centers with jaw axes cycling through the plane.
pub fn spread_grasps(n: usize, center: Vec3, spread: f64) -> Vec<Grasp> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let t = i as f64 / n.max(1) as f64;
            let a = golden * i as f64;
            let c = center + Vec3::new(a.cos(), a.sin(), t - 0.5) * spread * t.sqrt();
            let axis = Vec3::new((a * 0.5).cos(), (a * 0.5).sin(), 0.0);
            let theta = (t - 0.5) * PI * 0.9;
            Grasp::new(c, axis, theta).expect("valid grasp")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_have_the_requested_sizes() {
        assert_eq!(sphere(100, 0.03, Vec3::zeros()).len(), 100);
        assert_eq!(tabletop(100, 10).len(), 200);
        assert_eq!(spread_grasps(50, Vec3::zeros(), 0.05).len(), 50);
    }
}

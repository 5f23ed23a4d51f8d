//! Static 3-D k-d tree for radius and k-nearest-neighbour queries.
//!
//! Results are deterministic: radius queries return indices in ascending
//! order, kNN results are ordered by `(distance, index)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grasp::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    /// Points permuted into tree order.
    points: Vec<Vec3>,
    /// Original index of each entry of `points`.
    indices: Vec<usize>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        KdTree {
            points: order.iter().map(|&i| points[i]).collect(),
            indices: order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All indices with `‖p − center‖ ≤ radius`, ascending.
    pub fn within_radius(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_radius(center, radius, &mut |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Calls `f(index, squared_distance)` for each point within `radius`, in tree order.
    pub fn visit_radius(&self, center: &Vec3, radius: f64, f: &mut impl FnMut(usize, f64)) {
        if self.points.is_empty() || radius < 0.0 {
            return;
        }
        self.radius_rec(0, self.points.len(), 0, center, radius, radius * radius, f);
    }

    pub fn any_within(&self, center: &Vec3, radius: f64) -> bool {
        !self.points.is_empty()
            && radius >= 0.0
            && self.any_rec(0, self.points.len(), 0, center, radius)
    }

    fn any_rec(&self, lo: usize, hi: usize, depth: usize, center: &Vec3, radius: f64) -> bool {
        let r2 = radius * radius;
        if hi - lo <= LEAF_SIZE {
            return self.points[lo..hi]
                .iter()
                .any(|p| (p - center).norm_squared() <= r2);
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        let m = &self.points[mid];
        if (m - center).norm_squared() <= r2 {
            return true;
        }
        let diff = center[axis] - m[axis];
        (diff <= radius && self.any_rec(lo, mid, depth + 1, center, radius))
            || (diff >= -radius && self.any_rec(mid + 1, hi, depth + 1, center, radius))
    }

    /// The `k` nearest points as `(index, distance)`, closest first; ties by lower index.
    pub fn nearest(&self, center: &Vec3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, self.points.len(), 0, center, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn radius_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        center: &Vec3,
        radius: f64,
        r2: f64,
        f: &mut impl FnMut(usize, f64),
    ) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d2 = (self.points[i] - center).norm_squared();
                if d2 <= r2 {
                    f(self.indices[i], d2);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        let m = &self.points[mid];
        let d2 = (m - center).norm_squared();
        if d2 <= r2 {
            f(self.indices[mid], d2);
        }
        let diff = center[axis] - m[axis];
        if diff <= radius {
            self.radius_rec(lo, mid, depth + 1, center, radius, r2, f);
        }
        if diff >= -radius {
            self.radius_rec(mid + 1, hi, depth + 1, center, radius, r2, f);
        }
    }

    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        center: &Vec3,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let offer = |i: usize, heap: &mut BinaryHeap<Candidate>| {
            let c = Candidate {
                dist2: (self.points[i] - center).norm_squared(),
                index: self.indices[i],
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(c);
            }
        };
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                offer(i, heap);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        offer(mid, heap);
        let diff = center[axis] - self.points[mid][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, depth + 1, center, k, heap);
        let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
        if heap.len() < k || diff * diff <= worst {
            self.knn_rec(far.0, far.1, depth + 1, center, k, heap);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], depth: usize) {
    if order.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect()
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = cloud(2000, 1);
        let tree = KdTree::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let c = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let r = rng.gen_range(0.0..0.3);
            let expect: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - c).norm() <= r)
                .collect();
            assert_eq!(tree.within_radius(&c, r), expect);
        }
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = cloud(1500, 3);
        let tree = KdTree::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let k = rng.gen_range(1..40);
            let mut all: Vec<(usize, f64)> =
                (0..pts.len()).map(|i| (i, (pts[i] - c).norm_squared())).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let expect: Vec<usize> = all[..k].iter().map(|e| e.0).collect();
            let got: Vec<usize> = tree.nearest(&c, k).into_iter().map(|e| e.0).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn knn_ties_prefer_low_index() {
        let pts = vec![Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z()];
        let tree = KdTree::new(&pts);
        let got: Vec<usize> = tree.nearest(&Vec3::zeros(), 3).into_iter().map(|e| e.0).collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.within_radius(&Vec3::zeros(), 1.0).is_empty());
        assert!(tree.nearest(&Vec3::zeros(), 3).is_empty());
        assert!(!tree.any_within(&Vec3::zeros(), 1.0));
    }
}

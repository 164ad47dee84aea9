//! Point cloud containers, spatial queries, and patch machinery.
//!
//! All operations are pure functions over immutable inputs and safe to call
//! concurrently. kNN queries dispatch between an exhaustive scan (small
//! targets) and a kd-tree ([`SpatialIndex`]); the two paths return identical
//! results, including the distance-then-index tie ordering.

mod knn;
mod patch;

pub use knn::{knn_exhaustive, knn_indices, SpatialIndex, KNN_INDEX_THRESHOLD};
pub use patch::{extract_patch, extract_patch_indexed, stitch_assignments, stitch_cloud, Patch};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::vec3;
use crate::Result;

/// An ordered list of 3D positions; the unit of I/O and evaluation.
///
/// Invariants: at least one point, every coordinate finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    /// Validates and wraps a point list.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !points.iter().all(|&p| vec3::is_finite(p)) {
            return Err(Error::NonFinite);
        }
        Ok(PointCloud { points })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 3]> {
        self.points
    }

    /// The cloud translated by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| vec3::add(p, offset)).collect(),
        }
    }
}

/// Deterministic approximate bounding sphere (exact minimality not required).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingSphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Center = centroid of the axis-aligned bounding box, radius = max distance
/// from that center to any point.
pub fn bounding_sphere(cloud: &PointCloud) -> BoundingSphere {
    let pts = cloud.points();
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center = [
        (lo[0] + hi[0]) * 0.5,
        (lo[1] + hi[1]) * 0.5,
        (lo[2] + hi[2]) * 0.5,
    ];
    let mut max_d2 = 0.0f64;
    for p in pts {
        max_d2 = max_d2.max(vec3::dist_sq(*p, center));
    }
    BoundingSphere {
        center,
        radius: crate::fx::sqrt(max_d2),
    }
}

/// Greedy farthest point sampling starting from `seed_index`.
///
/// Each pick maximizes the minimum distance to the points already picked;
/// ties break by ascending index, so the result is deterministic.
pub fn farthest_point_sample(
    cloud: &PointCloud,
    m: usize,
    seed_index: usize,
) -> Result<Vec<usize>> {
    let pts = cloud.points();
    let n = pts.len();
    if m == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::KTooLarge { k: m, available: n });
    }
    if seed_index >= n {
        return Err(Error::IndexOutOfBounds {
            index: seed_index,
            len: n,
        });
    }

    let mut picked = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut min_d2: Vec<f64> = pts
        .iter()
        .map(|&p| vec3::dist_sq(p, pts[seed_index]))
        .collect();
    picked.push(seed_index);
    taken[seed_index] = true;

    while picked.len() < m {
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, &d2) in min_d2.iter().enumerate() {
            if !taken[i] && d2 > best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        picked.push(best);
        taken[best] = true;
        for (i, d2) in min_d2.iter_mut().enumerate() {
            let d = vec3::dist_sq(pts[i], pts[best]);
            if d < *d2 {
                *d2 = d;
            }
        }
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = crate::rng_from_seed(seed);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn cloud_rejects_empty_and_non_finite() {
        assert_eq!(PointCloud::new(Vec::new()).unwrap_err(), Error::EmptyCloud);
        assert_eq!(
            PointCloud::new(vec![[0.0, f64::NAN, 0.0]]).unwrap_err(),
            Error::NonFinite
        );
    }

    #[test]
    fn bounding_sphere_degenerate_and_symmetric() {
        let single = PointCloud::new(vec![[1.0, 2.0, 3.0]]).unwrap();
        let bs = bounding_sphere(&single);
        assert_eq!(bs.center, [1.0, 2.0, 3.0]);
        assert_eq!(bs.radius, 0.0);

        let two = PointCloud::new(vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let bs = bounding_sphere(&two);
        assert_eq!(bs.center, [0.0, 0.0, 0.0]);
        assert_eq!(bs.radius, 1.0);
    }

    #[test]
    fn bounding_sphere_matches_brute_force_scan() {
        let cloud = random_cloud(100, 11);
        let bs = bounding_sphere(&cloud);
        let brute = cloud
            .points()
            .iter()
            .map(|&p| vec3::dist(p, bs.center))
            .fold(0.0f64, f64::max);
        assert_eq!(bs.radius, brute);
        for p in cloud.points() {
            assert!(vec3::dist(*p, bs.center) <= bs.radius * (1.0 + 1e-9));
        }
    }

    #[test]
    fn fps_exhaustive_is_a_permutation() {
        let cloud = random_cloud(40, 3);
        let mut picks = farthest_point_sample(&cloud, 40, 5).unwrap();
        picks.sort_unstable();
        assert_eq!(picks, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn fps_picks_farthest_pair() {
        let cloud =
            PointCloud::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0]]).unwrap();
        assert_eq!(farthest_point_sample(&cloud, 2, 0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn fps_matches_reference_greedy() {
        let cloud = random_cloud(200, 17);
        let got = farthest_point_sample(&cloud, 8, 0).unwrap();

        // Reference: recompute min distance over the picked set from scratch
        // at every pick.
        let pts = cloud.points();
        let mut reference = vec![0usize];
        while reference.len() < 8 {
            let mut best = usize::MAX;
            let mut best_d2 = f64::NEG_INFINITY;
            for i in 0..pts.len() {
                if reference.contains(&i) {
                    continue;
                }
                let d2 = reference
                    .iter()
                    .map(|&j| vec3::dist_sq(pts[i], pts[j]))
                    .fold(f64::INFINITY, f64::min);
                if d2 > best_d2 {
                    best = i;
                    best_d2 = d2;
                }
            }
            reference.push(best);
        }
        assert_eq!(got, reference);
    }

    #[test]
    fn fps_validates_arguments() {
        let cloud = random_cloud(10, 1);
        assert!(matches!(
            farthest_point_sample(&cloud, 0, 0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            farthest_point_sample(&cloud, 11, 0),
            Err(Error::KTooLarge { .. })
        ));
        assert!(matches!(
            farthest_point_sample(&cloud, 2, 10),
            Err(Error::IndexOutOfBounds { .. })
        ));
    }
}

//! k-nearest-neighbor queries: exhaustive scan and a kd-tree index.
//!
//! Both paths return neighbors sorted ascending by squared distance, ties
//! broken by ascending point index, and must agree exactly.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;

use super::PointCloud;
use crate::error::Error;
use crate::vec3;
use crate::Result;

/// Targets larger than this are queried through a [`SpatialIndex`].
pub const KNN_INDEX_THRESHOLD: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    index: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Exhaustive kNN over `points`. `k` must not exceed `points.len()`.
pub fn knn_exhaustive(points: &[[f64; 3]], query: [f64; 3], k: usize) -> Vec<usize> {
    debug_assert!(k >= 1 && k <= points.len());
    let mut cands: Vec<Cand> = points
        .iter()
        .enumerate()
        .map(|(index, &p)| Cand {
            d2: vec3::dist_sq(p, query),
            index,
        })
        .collect();
    if k < cands.len() {
        cands.select_nth_unstable(k - 1);
        cands.truncate(k);
    }
    cands.sort_unstable();
    cands.into_iter().map(|c| c.index).collect()
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: u32,
    axis: u8,
    left: u32,
    right: u32,
}

/// kd-tree over a fixed set of points. Concurrent reads are safe.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: u32,
}

impl SpatialIndex {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_rec(points, &mut order, &mut nodes);
        SpatialIndex {
            points: points.to_vec(),
            nodes,
            root,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the `k` nearest points, distance-then-index ordered.
    pub fn nearest_k(&self, query: [f64; 3], k: usize) -> Vec<usize> {
        debug_assert!(k >= 1 && k <= self.points.len());
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| c.index).collect()
    }

    /// Index and squared distance of the single nearest point.
    pub fn nearest_one(&self, query: [f64; 3]) -> (usize, f64) {
        let mut best = Cand {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.search_one(self.root, query, &mut best);
        (best.index, best.d2)
    }

    fn search(&self, node: u32, query: [f64; 3], k: usize, heap: &mut BinaryHeap<Cand>) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let cand = Cand {
            d2: vec3::dist_sq(p, query),
            index: n.point as usize,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }

        let delta = query[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, k, heap);
        // The far side may hold equal-distance points with smaller indices,
        // so it is only skipped on a strictly larger plane distance.
        if heap.len() < k || delta * delta <= heap.peek().unwrap().d2 {
            self.search(far, query, k, heap);
        }
    }

    fn search_one(&self, node: u32, query: [f64; 3], best: &mut Cand) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let cand = Cand {
            d2: vec3::dist_sq(p, query),
            index: n.point as usize,
        };
        if cand < *best {
            *best = cand;
        }
        let delta = query[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search_one(near, query, best);
        if delta * delta <= best.d2 {
            self.search_one(far, query, best);
        }
    }
}

fn build_rec(points: &[[f64; 3]], order: &mut [u32], nodes: &mut Vec<Node>) -> u32 {
    if order.is_empty() {
        return NONE;
    }
    // Split along the axis with the widest extent for this subset.
    let mut lo = points[order[0] as usize];
    let mut hi = lo;
    for &i in order.iter() {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut axis = 0usize;
    let mut extent = hi[0] - lo[0];
    for a in 1..3 {
        if hi[a] - lo[a] > extent {
            extent = hi[a] - lo[a];
            axis = a;
        }
    }

    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let point = order[mid];
    let slot = nodes.len() as u32;
    nodes.push(Node {
        point,
        axis: axis as u8,
        left: NONE,
        right: NONE,
    });
    let (left_half, rest) = order.split_at_mut(mid);
    let right_half = &mut rest[1..];
    let left = build_rec(points, left_half, nodes);
    let right = build_rec(points, right_half, nodes);
    nodes[slot as usize].left = left;
    nodes[slot as usize].right = right;
    slot
}

/// For each query, the indices of its `k` nearest points in `target`,
/// sorted ascending by distance with ties broken by ascending index.
pub fn knn_indices(
    queries: &[[f64; 3]],
    target: &PointCloud,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    let pts = target.points();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > pts.len() {
        return Err(Error::KTooLarge {
            k,
            available: pts.len(),
        });
    }
    if pts.len() > KNN_INDEX_THRESHOLD {
        let index = SpatialIndex::build(pts);
        Ok(queries.iter().map(|&q| index.nearest_k(q, k)).collect())
    } else {
        Ok(queries.iter().map(|&q| knn_exhaustive(pts, q, k)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = crate::rng_from_seed(seed);
        (0..n)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect()
    }

    #[test]
    fn query_on_target_point_returns_itself() {
        let pts = random_points(64, 2);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let got = knn_indices(&[pts[17]], &cloud, 1).unwrap();
        assert_eq!(got, vec![vec![17]]);
    }

    #[test]
    fn collinear_ordering() {
        let cloud =
            PointCloud::new(vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
        let got = knn_indices(&[[0.0, 0.0, 0.0]], &cloud, 2).unwrap();
        assert_eq!(got, vec![vec![0, 1]]);
    }

    #[test]
    fn k_too_large_is_an_error() {
        let cloud = PointCloud::new(vec![[0.0; 3]; 4]).unwrap();
        assert!(matches!(
            knn_indices(&[[0.0; 3]], &cloud, 5),
            Err(Error::KTooLarge { k: 5, available: 4 })
        ));
    }

    #[test]
    fn random_queries_match_exhaustive_scan() {
        let targets = random_points(500, 5);
        let cloud = PointCloud::new(targets.clone()).unwrap();
        let queries = random_points(50, 6);
        let got = knn_indices(&queries, &cloud, 16).unwrap();
        for (q, row) in queries.iter().zip(&got) {
            // Independent O(nm) oracle: full sort of (distance, index) pairs.
            let mut pairs: Vec<(f64, usize)> = targets
                .iter()
                .enumerate()
                .map(|(i, &t)| (vec3::dist_sq(t, *q), i))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<usize> = pairs[..16].iter().map(|&(_, i)| i).collect();
            assert_eq!(*row, expected);
        }
    }

    #[test]
    fn index_and_exhaustive_agree_with_duplicates() {
        // Duplicated coordinates exercise the distance-tie path.
        let mut pts = random_points(700, 9);
        let dups: Vec<[f64; 3]> = pts[..700].iter().step_by(2).copied().collect();
        pts.extend(dups);
        let index = SpatialIndex::build(&pts);
        let queries = random_points(80, 10);
        for q in queries {
            for k in [1, 2, 7, 16] {
                assert_eq!(index.nearest_k(q, k), knn_exhaustive(&pts, q, k));
            }
            let (one, d2) = index.nearest_one(q);
            let ex = knn_exhaustive(&pts, q, 1)[0];
            assert_eq!(one, ex);
            assert_eq!(d2, vec3::dist_sq(pts[ex], q));
        }
    }

    #[test]
    fn dispatch_above_threshold_uses_index_and_matches() {
        let pts = random_points(KNN_INDEX_THRESHOLD + 200, 12);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let queries = random_points(20, 13);
        let via_dispatch = knn_indices(&queries, &cloud, 8).unwrap();
        for (q, row) in queries.iter().zip(&via_dispatch) {
            assert_eq!(*row, knn_exhaustive(&pts, *q, 8));
        }
    }
}

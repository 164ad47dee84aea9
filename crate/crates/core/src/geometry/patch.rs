//! Patch extraction, normalization, and reassembly of filtered patches.

use alloc::vec;
use alloc::vec::Vec;

use super::knn::{knn_exhaustive, SpatialIndex};
use super::PointCloud;
use crate::error::Error;
use crate::vec3;
use crate::Result;

/// A k-point neighborhood in its normalized frame.
///
/// Points are stored as `(p - center) / scale` where `center` is the
/// reference point position and `scale` the max member distance from it, so
/// networks always see a unit-ball input regardless of sampling density.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    points: Vec<[f64; 3]>,
    ref_index: usize,
    center: [f64; 3],
    scale: f64,
    member_indices: Vec<usize>,
}

impl Patch {
    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in the normalized patch frame.
    #[inline]
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    #[inline]
    pub fn ref_index(&self) -> usize {
        self.ref_index
    }

    #[inline]
    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Source-cloud indices of the members, in neighbor order.
    #[inline]
    pub fn member_indices(&self) -> &[usize] {
        &self.member_indices
    }

    /// The same patch frame carrying updated (e.g. filtered) points.
    pub fn with_points(&self, points: Vec<[f64; 3]>) -> Result<Patch> {
        if points.len() != self.points.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "patch holds {} points, replacement has {}",
                self.points.len(),
                points.len()
            )));
        }
        Ok(Patch {
            points,
            ref_index: self.ref_index,
            center: self.center,
            scale: self.scale,
            member_indices: self.member_indices.clone(),
        })
    }

    /// Maps a normalized-frame point back to world coordinates.
    #[inline]
    pub fn denormalize(&self, p: [f64; 3]) -> [f64; 3] {
        vec3::add(vec3::scale(p, self.scale), self.center)
    }

    pub fn denormalized_points(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|&p| self.denormalize(p)).collect()
    }
}

/// Extracts the kNN patch around `cloud[ref_index]` and normalizes it.
pub fn extract_patch(cloud: &PointCloud, ref_index: usize, k: usize) -> Result<Patch> {
    extract_patch_indexed(cloud, None, ref_index, k)
}

/// [`extract_patch`] reusing a prebuilt index over the same cloud.
pub fn extract_patch_indexed(
    cloud: &PointCloud,
    index: Option<&SpatialIndex>,
    ref_index: usize,
    k: usize,
) -> Result<Patch> {
    let pts = cloud.points();
    if ref_index >= pts.len() {
        return Err(Error::IndexOutOfBounds {
            index: ref_index,
            len: pts.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("patch size must be at least 1".into()));
    }
    if k > pts.len() {
        return Err(Error::KTooLarge {
            k,
            available: pts.len(),
        });
    }
    let center = pts[ref_index];
    let member_indices = match index {
        Some(idx) => {
            debug_assert_eq!(idx.len(), pts.len());
            idx.nearest_k(center, k)
        }
        None => knn_exhaustive(pts, center, k),
    };

    let mut max_d2 = 0.0f64;
    for &i in &member_indices {
        max_d2 = max_d2.max(vec3::dist_sq(pts[i], center));
    }
    let max_d = crate::fx::sqrt(max_d2);
    let scale = if max_d > 0.0 { max_d } else { 1.0 };
    let inv = 1.0 / scale;
    let points = member_indices
        .iter()
        .map(|&i| vec3::scale(vec3::sub(pts[i], center), inv))
        .collect();

    Ok(Patch {
        points,
        ref_index,
        center,
        scale,
        member_indices,
    })
}

/// For every cloud point, the `(patch, slot)` it takes its output from: the
/// covering patch whose seed is nearest to the point's original position,
/// ties resolved by ascending seed order.
pub fn stitch_assignments(
    cloud: &PointCloud,
    seeds: &[usize],
    patches: &[Patch],
) -> Result<Vec<(usize, usize)>> {
    if seeds.len() != patches.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} seeds but {} patches",
            seeds.len(),
            patches.len()
        )));
    }
    let pts = cloud.points();
    for (slot, (&seed, patch)) in seeds.iter().zip(patches).enumerate() {
        if patch.ref_index() != seed {
            return Err(Error::PatchSeedMismatch { slot });
        }
        if seed >= pts.len() {
            return Err(Error::IndexOutOfBounds {
                index: seed,
                len: pts.len(),
            });
        }
    }

    let mut best: Vec<Option<(usize, usize, f64)>> = vec![None; pts.len()];
    for (pi, patch) in patches.iter().enumerate() {
        for (slot, &member) in patch.member_indices().iter().enumerate() {
            if member >= pts.len() {
                return Err(Error::IndexOutOfBounds {
                    index: member,
                    len: pts.len(),
                });
            }
            let d2 = vec3::dist_sq(pts[member], patch.center());
            let better = match best[member] {
                None => true,
                Some((_, _, cur)) => d2 < cur,
            };
            if better {
                best[member] = Some((pi, slot, d2));
            }
        }
    }

    best.into_iter()
        .enumerate()
        .map(|(i, b)| match b {
            Some((pi, slot, _)) => Ok((pi, slot)),
            None => Err(Error::UncoveredPoint { index: i }),
        })
        .collect()
}

/// Rebuilds a whole cloud from filtered patches.
///
/// Each point's position is taken from exactly one patch (nearest seed,
/// see [`stitch_assignments`]) and denormalized through that patch's stored
/// transform. Point order and count match the input cloud.
pub fn stitch_cloud(
    cloud: &PointCloud,
    seeds: &[usize],
    patches: &[Patch],
) -> Result<PointCloud> {
    let assignments = stitch_assignments(cloud, seeds, patches)?;
    let points = assignments
        .into_iter()
        .map(|(pi, slot)| patches[pi].denormalize(patches[pi].points()[slot]))
        .collect();
    PointCloud::new(points)
}

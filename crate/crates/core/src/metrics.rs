//! Evaluation metrics and the noise generators used in experiments.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::fx;
use crate::geometry::{bounding_sphere, PointCloud, SpatialIndex, KNN_INDEX_THRESHOLD};
use crate::vec3;
use crate::Result;

/// Noise families; `scale` is a fraction of a bounding-sphere radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    AnisoGaussian,
    Laplace,
    UniformSphere,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::AnisoGaussian => "aniso_gaussian",
            NoiseKind::Laplace => "laplace",
            NoiseKind::UniformSphere => "uniform_sphere",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(NoiseKind::Gaussian),
            "aniso_gaussian" => Some(NoiseKind::AnisoGaussian),
            "laplace" => Some(NoiseKind::Laplace),
            "uniform_sphere" => Some(NoiseKind::UniformSphere),
            _ => None,
        }
    }
}

/// A noise family plus its scale relative to the bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
}

/// Cholesky factor of the anisotropic covariance
/// `[[1, -1/2, -1/4], [-1/2, 1, -1/4], [-1/4, -1/4, 1]]`,
/// the fixed factorization used to correlate Gaussian draws.
fn aniso_cholesky() -> [[f64; 3]; 3] {
    let s3 = fx::sqrt(3.0);
    [
        [1.0, 0.0, 0.0],
        [-0.5, s3 / 2.0, 0.0],
        [-0.25, -s3 / 4.0, s3 / 2.0],
    ]
}

/// One unit-scale draw of the given noise family.
///
/// - `Gaussian`: standard normal per coordinate.
/// - `AnisoGaussian`: correlated normal with the documented covariance.
/// - `Laplace`: unit-scale Laplace per coordinate (inverse CDF).
/// - `UniformSphere`: uniform in the unit ball via a normalized Gaussian
///   direction and an inverse-CDF radius `u^(1/3)`.
pub fn unit_noise(kind: NoiseKind, rng: &mut crate::Rng) -> [f64; 3] {
    match kind {
        NoiseKind::Gaussian => {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            [x, y, z]
        }
        NoiseKind::AnisoGaussian => {
            let l = aniso_cholesky();
            let z = [
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ];
            [
                l[0][0] * z[0],
                l[1][0] * z[0] + l[1][1] * z[1],
                l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
            ]
        }
        NoiseKind::Laplace => {
            let mut draw = || {
                let u: f64 = rng.random::<f64>() - 0.5;
                let sign = if u < 0.0 { -1.0 } else { 1.0 };
                -sign * fx::ln(1.0 - 2.0 * fx::abs(u))
            };
            [draw(), draw(), draw()]
        }
        NoiseKind::UniformSphere => {
            let dir = loop {
                let v = [
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ];
                let n = vec3::norm(v);
                if n > 1e-12 {
                    break vec3::scale(v, 1.0 / n);
                }
            };
            let r = fx::cbrt(rng.random::<f64>());
            vec3::scale(dir, r)
        }
    }
}

/// `n` offsets of the given family, scaled by
/// `spec.scale * bounding_radius`. Seed-deterministic.
pub fn gen_noise(
    spec: &NoiseSpec,
    n: usize,
    bounding_radius: f64,
    rng: &mut crate::Rng,
) -> Vec<[f64; 3]> {
    let s = spec.scale * bounding_radius;
    (0..n)
        .map(|_| vec3::scale(unit_noise(spec.kind, rng), s))
        .collect()
}

fn mean_sq_nearest(from: &[[f64; 3]], to: &[[f64; 3]], index: Option<&SpatialIndex>) -> f64 {
    let mut acc = 0.0;
    for &p in from {
        let d2 = match index {
            Some(idx) => idx.nearest_one(p).1,
            None => to
                .iter()
                .map(|&q| vec3::dist_sq(p, q))
                .fold(f64::INFINITY, f64::min),
        };
        acc += d2;
    }
    acc / from.len() as f64
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance in
/// both directions, summed.
///
/// Both clouds are first normalized into the unit bounding sphere of the
/// clean cloud `b`, so values are comparable across noise levels and
/// invariant to joint translation. Callers multiply by `1e4` for table
/// formatting only.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sphere = bounding_sphere(b);
    let inv = if sphere.radius > 0.0 {
        1.0 / sphere.radius
    } else {
        1.0
    };
    let norm = |pts: &[[f64; 3]]| -> Vec<[f64; 3]> {
        pts.iter()
            .map(|&p| vec3::scale(vec3::sub(p, sphere.center), inv))
            .collect()
    };
    let an = norm(a.points());
    let bn = norm(b.points());

    let a_index = (an.len() > KNN_INDEX_THRESHOLD).then(|| SpatialIndex::build(&an));
    let b_index = (bn.len() > KNN_INDEX_THRESHOLD).then(|| SpatialIndex::build(&bn));
    Ok(mean_sq_nearest(&an, &bn, b_index.as_ref()) + mean_sq_nearest(&bn, &an, a_index.as_ref()))
}

/// Analytic surfaces with closed-form unsigned distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceSpec {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Torus around the z axis through `center`.
    Torus {
        center: [f64; 3],
        major_radius: f64,
        minor_radius: f64,
    },
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
}

impl SurfaceSpec {
    /// Unsigned distance from `p` to the surface.
    pub fn distance(&self, p: [f64; 3]) -> f64 {
        match *self {
            SurfaceSpec::Sphere { center, radius } => {
                fx::abs(vec3::dist(p, center) - radius)
            }
            SurfaceSpec::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let d = vec3::sub(p, center);
                let ring = fx::sqrt(d[0] * d[0] + d[1] * d[1]) - major_radius;
                fx::abs(fx::sqrt(ring * ring + d[2] * d[2]) - minor_radius)
            }
            SurfaceSpec::Plane { point, normal } => {
                let n = vec3::scale(normal, 1.0 / vec3::norm(normal));
                fx::abs(vec3::dot(n, vec3::sub(p, point)))
            }
        }
    }
}

/// Mean squared analytic distance from each point to the surface. The
/// point-to-surface stand-in for mesh-based evaluation on procedural shapes.
pub fn point_to_surface(a: &PointCloud, surf: &SurfaceSpec) -> f64 {
    let mut acc = 0.0;
    for &p in a.points() {
        let d = surf.distance(p);
        acc += d * d;
    }
    acc / a.len() as f64
}

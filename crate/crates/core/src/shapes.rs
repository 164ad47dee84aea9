//! Procedural clean-surface samplers for training and evaluation.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::fx;
use crate::geometry::PointCloud;
use crate::metrics::SurfaceSpec;
use crate::vec3;
use crate::Result;

/// Shape families. All are centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
    /// Axis-aligned rectangle in the z = 0 plane.
    PlanePatch { width: f64, height: f64 },
    /// Surface of a regular icosahedron with the given edge length.
    Icosahedron { edge: f64 },
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::PlanePatch { .. } => "plane",
            ShapeKind::Icosahedron { .. } => "icosahedron",
        }
    }
}

/// A shape plus a target point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub points: usize,
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 64 {
            return Err(Error::InvalidConfig(
                "shape needs at least 64 points".into(),
            ));
        }
        let positive = match self.kind {
            ShapeKind::Sphere { radius } => radius > 0.0,
            ShapeKind::Torus {
                major_radius,
                minor_radius,
            } => minor_radius > 0.0 && major_radius > minor_radius,
            ShapeKind::PlanePatch { width, height } => width > 0.0 && height > 0.0,
            ShapeKind::Icosahedron { edge } => edge > 0.0,
        };
        if !positive {
            return Err(Error::InvalidConfig("shape size parameters".into()));
        }
        Ok(())
    }
}

fn gaussian_direction(rng: &mut crate::Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ];
        let n = vec3::norm(v);
        if n > 1e-12 {
            return vec3::scale(v, 1.0 / n);
        }
    }
}

/// Golden-ratio icosahedron: 12 vertices with edge length 2, and its
/// 20 triangular faces.
fn icosahedron_mesh() -> ([[f64; 3]; 12], [[usize; 3]; 20]) {
    let phi = (1.0 + fx::sqrt(5.0)) / 2.0;
    let v = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let f = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 3],
    ];
    (v, f)
}

fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let ab = vec3::sub(b, a);
    let ac = vec3::sub(c, a);
    let cx = [
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    ];
    0.5 * vec3::norm(cx)
}

/// Area-uniform random sampling of the shape surface.
///
/// Torus sampling rejects tube angles against the `R + r cos(theta)` area
/// element so density does not pile up near the inner ring. Returns the
/// analytic surface where one exists (icosahedron is evaluated by Chamfer
/// distance only).
pub fn sample_shape(spec: &ShapeSpec, rng: &mut crate::Rng) -> Result<(PointCloud, Option<SurfaceSpec>)> {
    spec.validate()?;
    let n = spec.points;
    let mut pts = Vec::with_capacity(n);
    let surface = match spec.kind {
        ShapeKind::Sphere { radius } => {
            for _ in 0..n {
                pts.push(vec3::scale(gaussian_direction(rng), radius));
            }
            Some(SurfaceSpec::Sphere {
                center: [0.0; 3],
                radius,
            })
        }
        ShapeKind::Torus {
            major_radius,
            minor_radius,
        } => {
            for _ in 0..n {
                let theta = loop {
                    let t = rng.random::<f64>() * core::f64::consts::TAU;
                    let accept = (major_radius + minor_radius * fx::cos(t))
                        / (major_radius + minor_radius);
                    if rng.random::<f64>() <= accept {
                        break t;
                    }
                };
                let phi = rng.random::<f64>() * core::f64::consts::TAU;
                let ring = major_radius + minor_radius * fx::cos(theta);
                pts.push([
                    ring * fx::cos(phi),
                    ring * fx::sin(phi),
                    minor_radius * fx::sin(theta),
                ]);
            }
            Some(SurfaceSpec::Torus {
                center: [0.0; 3],
                major_radius,
                minor_radius,
            })
        }
        ShapeKind::PlanePatch { width, height } => {
            for _ in 0..n {
                pts.push([
                    (rng.random::<f64>() - 0.5) * width,
                    (rng.random::<f64>() - 0.5) * height,
                    0.0,
                ]);
            }
            Some(SurfaceSpec::Plane {
                point: [0.0; 3],
                normal: [0.0, 0.0, 1.0],
            })
        }
        ShapeKind::Icosahedron { edge } => {
            let (verts, faces) = icosahedron_mesh();
            let s = edge / 2.0;
            let verts: Vec<[f64; 3]> = verts.iter().map(|&v| vec3::scale(v, s)).collect();
            let areas: Vec<f64> = faces
                .iter()
                .map(|f| triangle_area(verts[f[0]], verts[f[1]], verts[f[2]]))
                .collect();
            let total: f64 = areas.iter().sum();
            for _ in 0..n {
                // Area-weighted face choice, then uniform barycentric point.
                let mut pick = rng.random::<f64>() * total;
                let mut face = faces.len() - 1;
                for (i, &a) in areas.iter().enumerate() {
                    if pick < a {
                        face = i;
                        break;
                    }
                    pick -= a;
                }
                let [ia, ib, ic] = faces[face];
                let r1 = fx::sqrt(rng.random::<f64>());
                let r2 = rng.random::<f64>();
                let (a, b, c) = (verts[ia], verts[ib], verts[ic]);
                let mut p = vec3::scale(a, 1.0 - r1);
                p = vec3::add(p, vec3::scale(b, r1 * (1.0 - r2)));
                p = vec3::add(p, vec3::scale(c, r1 * r2));
                pts.push(p);
            }
            None
        }
    };
    Ok((PointCloud::new(pts)?, surface))
}

/// The four clean shapes used for default training, 2048 points each.
pub fn default_training_set() -> Vec<ShapeSpec> {
    let n = 2048;
    alloc::vec![
        ShapeSpec {
            kind: ShapeKind::Sphere { radius: 1.0 },
            points: n,
        },
        ShapeSpec {
            kind: ShapeKind::Torus {
                major_radius: 1.0,
                minor_radius: 0.4,
            },
            points: n,
        },
        ShapeSpec {
            kind: ShapeKind::PlanePatch {
                width: 2.0,
                height: 2.0,
            },
            points: n,
        },
        ShapeSpec {
            kind: ShapeKind::Icosahedron { edge: 1.0 },
            points: n,
        },
    ]
}

/// Evaluation shapes: same families with perturbed sizes, sampled with
/// fresh seeds so they stay unseen during training.
pub fn default_eval_set() -> Vec<ShapeSpec> {
    alloc::vec![
        ShapeSpec {
            kind: ShapeKind::Sphere { radius: 0.9 },
            points: 2000,
        },
        ShapeSpec {
            kind: ShapeKind::Torus {
                major_radius: 1.1,
                minor_radius: 0.35,
            },
            points: 2000,
        },
        ShapeSpec {
            kind: ShapeKind::PlanePatch {
                width: 1.6,
                height: 2.4,
            },
            points: 2000,
        },
        ShapeSpec {
            kind: ShapeKind::Icosahedron { edge: 1.2 },
            points: 2000,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::point_to_surface;

    #[test]
    fn sphere_points_sit_on_the_radius() {
        let spec = ShapeSpec {
            kind: ShapeKind::Sphere { radius: 1.0 },
            points: 1000,
        };
        let (cloud, surf) = sample_shape(&spec, &mut crate::rng_from_seed(1)).unwrap();
        for p in cloud.points() {
            assert!((vec3::norm(*p) - 1.0).abs() <= 1e-12);
        }
        assert!(point_to_surface(&cloud, &surf.unwrap()) <= 1e-20);
    }

    #[test]
    fn plane_points_satisfy_the_plane_equation() {
        let spec = ShapeSpec {
            kind: ShapeKind::PlanePatch {
                width: 2.0,
                height: 2.0,
            },
            points: 500,
        };
        let (cloud, surf) = sample_shape(&spec, &mut crate::rng_from_seed(2)).unwrap();
        for p in cloud.points() {
            assert!(p[2].abs() <= 1e-12);
        }
        assert!(point_to_surface(&cloud, &surf.unwrap()) <= 1e-20);
    }

    #[test]
    fn torus_points_lie_on_the_surface() {
        let spec = ShapeSpec {
            kind: ShapeKind::Torus {
                major_radius: 1.0,
                minor_radius: 0.4,
            },
            points: 500,
        };
        let (cloud, surf) = sample_shape(&spec, &mut crate::rng_from_seed(3)).unwrap();
        assert!(point_to_surface(&cloud, &surf.unwrap()) <= 1e-20);
    }

    #[test]
    fn sphere_sampling_is_balanced() {
        // CLT bound on the mean of uniform sphere samples.
        let n = 4096;
        let spec = ShapeSpec {
            kind: ShapeKind::Sphere { radius: 1.0 },
            points: n,
        };
        let (cloud, _) = sample_shape(&spec, &mut crate::rng_from_seed(4)).unwrap();
        let mut mean = [0.0f64; 3];
        for p in cloud.points() {
            for a in 0..3 {
                mean[a] += p[a];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        assert!(vec3::norm(mean) <= 4.0 / fx::sqrt(n as f64));
    }

    #[test]
    fn icosahedron_points_lie_on_some_face_plane() {
        let spec = ShapeSpec {
            kind: ShapeKind::Icosahedron { edge: 1.0 },
            points: 256,
        };
        let (cloud, surf) = sample_shape(&spec, &mut crate::rng_from_seed(5)).unwrap();
        assert!(surf.is_none());
        let (verts, faces) = icosahedron_mesh();
        let verts: Vec<[f64; 3]> = verts.iter().map(|&v| vec3::scale(v, 0.5)).collect();
        for p in cloud.points() {
            let mut on_any = false;
            for f in &faces {
                let a = verts[f[0]];
                let n = {
                    let ab = vec3::sub(verts[f[1]], a);
                    let ac = vec3::sub(verts[f[2]], a);
                    [
                        ab[1] * ac[2] - ab[2] * ac[1],
                        ab[2] * ac[0] - ab[0] * ac[2],
                        ab[0] * ac[1] - ab[1] * ac[0],
                    ]
                };
                let d = vec3::dot(n, vec3::sub(*p, a)) / vec3::norm(n);
                if d.abs() <= 1e-9 {
                    on_any = true;
                    break;
                }
            }
            assert!(on_any);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        for spec in default_training_set() {
            let (a, _) = sample_shape(&spec, &mut crate::rng_from_seed(9)).unwrap();
            let (b, _) = sample_shape(&spec, &mut crate::rng_from_seed(9)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = ShapeSpec {
            kind: ShapeKind::Torus {
                major_radius: 0.3,
                minor_radius: 0.4,
            },
            points: 256,
        };
        assert!(sample_shape(&bad, &mut crate::rng_from_seed(1)).is_err());
        let small = ShapeSpec {
            kind: ShapeKind::Sphere { radius: 1.0 },
            points: 32,
        };
        assert!(sample_shape(&small, &mut crate::rng_from_seed(1)).is_err());
    }

    use rand::Rng as _;

    #[test]
    fn torus_rejection_does_not_bias_azimuth() {
        let mut rng = crate::rng_from_seed(6);
        let spec = ShapeSpec {
            kind: ShapeKind::Torus {
                major_radius: 1.0,
                minor_radius: 0.4,
            },
            points: 8192,
        };
        let (cloud, _) = sample_shape(&spec, &mut rng).unwrap();
        // Azimuthal angle should be uniform: compare quadrant counts.
        let mut quad = [0usize; 4];
        for p in cloud.points() {
            let a = p[1].atan2(p[0]);
            let q = if a < -core::f64::consts::FRAC_PI_2 {
                0
            } else if a < 0.0 {
                1
            } else if a < core::f64::consts::FRAC_PI_2 {
                2
            } else {
                3
            };
            quad[q] += 1;
        }
        for &c in &quad {
            let expected = 8192.0 / 4.0;
            assert!((c as f64 - expected).abs() < 5.0 * (expected as f64).sqrt());
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use super::{AttributeCatalog, ObjectRecord, SceneError};
use crate::rotation::Vec3;

/// Analytic surface used to stand in for an object's geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_height: f64 },
    /// Axis-aligned box in the object frame.
    Box { half: Vec3 },
}

// Base half-extents of the proxy boxes, before per-asset variation.
const CHAIR: Vec3 = [0.45, 0.45, 0.85];
const SOFA: Vec3 = [1.0, 0.45, 0.45];
const TABLE: Vec3 = [0.8, 0.5, 0.4];

impl Primitive {
    /// Primitive for a canonical shape name at the given scale.
    pub fn for_shape(shape: &str, scale: f64) -> Result<Self, SceneError> {
        let s = scale;
        let prim = match shape {
            "sphere" => Primitive::Sphere { radius: s },
            "cube" => Primitive::Box { half: [s; 3] },
            "cylinder" => Primitive::Cylinder {
                radius: s,
                half_height: s,
            },
            "airliner" => Primitive::Box { half: [1.0 * s, 0.9 * s, 0.25 * s] },
            "biplane" => Primitive::Box { half: [0.7 * s, 0.9 * s, 0.35 * s] },
            "fighter" => Primitive::Box { half: [0.9 * s, 0.6 * s, 0.2 * s] },
            "glider" => Primitive::Box { half: [0.6 * s, 1.0 * s, 0.15 * s] },
            "jet" => Primitive::Box { half: [0.8 * s, 0.7 * s, 0.25 * s] },
            other => {
                let (base, id) = proxy_parts(other)
                    .ok_or_else(|| SceneError::UnknownShape(other.to_string()))?;
                // Spread proxies of one category over ±15% extents.
                let jitter = |k: u32| 0.85 + 0.3 * f64::from((id * 37 + k * 11) % 101) / 100.0;
                Primitive::Box {
                    half: [
                        base[0] * jitter(0) * s,
                        base[1] * jitter(1) * s,
                        base[2] * jitter(2) * s,
                    ],
                }
            }
        };
        Ok(prim)
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
            Primitive::Cylinder {
                radius,
                half_height,
            } => 2.0 * PI * radius * (2.0 * half_height) + 2.0 * PI * radius * radius,
            Primitive::Box { half: [a, b, c] } => 8.0 * (a * b + b * c + a * c),
        }
    }

    /// Uniform sample on the surface, in the object frame.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        match *self {
            Primitive::Sphere { radius } => loop {
                let v: Vec3 = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let n = crate::rotation::norm(v);
                if n > 1e-12 {
                    break crate::rotation::scale(v, radius / n);
                }
            },
            Primitive::Cylinder {
                radius,
                half_height,
            } => {
                let side = 2.0 * PI * radius * 2.0 * half_height;
                let cap = PI * radius * radius;
                let pick = rng.random_range(0.0..side + 2.0 * cap);
                let theta = rng.random_range(0.0..2.0 * PI);
                if pick < side {
                    let z = rng.random_range(-half_height..half_height);
                    [radius * theta.cos(), radius * theta.sin(), z]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if pick < side + cap { half_height } else { -half_height };
                    [r * theta.cos(), r * theta.sin(), z]
                }
            }
            Primitive::Box { half } => {
                let areas = [half[1] * half[2], half[0] * half[2], half[0] * half[1]];
                let pick = rng.random_range(0.0..areas.iter().sum::<f64>());
                let axis = if pick < areas[0] {
                    0
                } else if pick < areas[0] + areas[1] {
                    1
                } else {
                    2
                };
                let mut p = [0.0; 3];
                for (k, slot) in p.iter_mut().enumerate() {
                    *slot = if k == axis {
                        if rng.random::<bool>() {
                            half[k]
                        } else {
                            -half[k]
                        }
                    } else {
                        rng.random_range(-half[k]..half[k])
                    };
                }
                p
            }
        }
    }
}

fn proxy_parts(name: &str) -> Option<(Vec3, u32)> {
    let (prefix, digits) = name.split_once('_')?;
    let base = match prefix {
        "chairs" => CHAIR,
        "sofas" => SOFA,
        "tables" => TABLE,
        _ => return None,
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((base, digits.parse().ok()?))
}

/// Samples `n` world-frame points on an object's surface: scaled by size,
/// rotated, then translated. Deterministic in `seed`.
pub fn sample_surface_points(
    obj: &ObjectRecord,
    catalog: &AttributeCatalog,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec3>, SceneError> {
    let shape = obj
        .shape
        .as_deref()
        .ok_or_else(|| SceneError::UnknownShape("<none>".into()))?;
    let prim = Primitive::for_shape(shape, obj.scale(catalog))?;
    let rot = obj.rotation();
    let t = obj.position();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let p = rot.apply(prim.sample(&mut rng));
            [p[0] + t[0], p[1] + t[1], p[2] + t[2]]
        })
        .collect())
}

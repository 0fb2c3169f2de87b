use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::{finish_record, record_rng, uniform_pick, DatagenError, DatasetRecord, Split, Task};
use crate::dsl::{quantize, EmitOptions};
use crate::exec::{self, Parallelism};
use crate::rotation::{EulerAngles, EulerConvention, EulerOrder, Rotation, RotationRepr};
use crate::scene::{CameraRecord, Location, ObjectRecord, SceneProgram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub center: f64,
    pub half_width: f64,
}

impl Gap {
    pub fn contains(&self, a: f64) -> bool {
        (a - self.center).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum So3Region {
    Id,
    Ood,
}

/// Held-out angle intervals for each of the three Euler components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGapSpec {
    pub components: [Vec<Gap>; 3],
}

impl Default for AngleGapSpec {
    fn default() -> Self {
        let gaps: Vec<Gap> = [-2.0 * PI / 3.0, 0.0, 2.0 * PI / 3.0]
            .into_iter()
            .map(|center| Gap {
                center,
                half_width: PI / 20.0,
            })
            .collect();
        Self::uniform(gaps)
    }
}

impl AngleGapSpec {
    pub fn uniform(gaps: Vec<Gap>) -> Self {
        Self {
            components: [gaps.clone(), gaps.clone(), gaps],
        }
    }

    /// Sampling domain of component `k`. The middle angle is kept inside
    /// (-π/2, π/2) so the emitted decomposition reproduces the sampled triple.
    pub fn domain(k: usize) -> (f64, f64) {
        if k == 1 {
            (-FRAC_PI_2, FRAC_PI_2)
        } else {
            (-PI, PI)
        }
    }

    pub fn in_gap(&self, k: usize, a: f64) -> bool {
        self.components[k].iter().any(|g| g.contains(a))
    }

    pub fn in_region(&self, k: usize, a: f64, region: So3Region) -> bool {
        let (lo, hi) = Self::domain(k);
        lo < a && a < hi && (self.in_gap(k, a) == (region == So3Region::Ood))
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        for (k, gaps) in self.components.iter().enumerate() {
            for g in gaps {
                if !(g.half_width > 0.0) || g.center < -PI || g.center >= PI {
                    return Err(DatagenError::InvalidConfig(format!(
                        "component {k}: gap {g:?} must have positive width and a center in [-pi, pi)"
                    )));
                }
            }
            let mut sorted = gaps.clone();
            sorted.sort_by(|a, b| a.center.total_cmp(&b.center));
            if sorted
                .windows(2)
                .any(|w| w[0].center + w[0].half_width >= w[1].center - w[1].half_width)
            {
                return Err(DatagenError::InvalidConfig(format!("component {k}: overlapping gaps")));
            }
        }
        Ok(())
    }

    /// Disjoint intervals making up a component's region.
    pub fn intervals(&self, k: usize, region: So3Region) -> Vec<(f64, f64)> {
        let (lo, hi) = Self::domain(k);
        let mut gaps: Vec<(f64, f64)> = self.components[k]
            .iter()
            .map(|g| ((g.center - g.half_width).max(lo), (g.center + g.half_width).min(hi)))
            .filter(|(a, b)| a < b)
            .collect();
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        match region {
            So3Region::Ood => gaps,
            So3Region::Id => {
                let mut out = Vec::new();
                let mut cursor = lo;
                for (a, b) in gaps {
                    if a > cursor {
                        out.push((cursor, a));
                    }
                    cursor = cursor.max(b);
                }
                if cursor < hi {
                    out.push((cursor, hi));
                }
                out
            }
        }
    }

    /// Draws a three-decimal angle from a component's region.
    pub fn sample<R: Rng>(&self, k: usize, region: So3Region, rng: &mut R) -> Result<f64, DatagenError> {
        let iv = self.intervals(k, region);
        let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
        if !(total > 2e-3) {
            return Err(DatagenError::EmptyRegion(format!("component {k}, {region:?}")));
        }
        loop {
            let mut u = rng.random_range(0.0..total);
            let mut pick = iv[iv.len() - 1];
            for &(a, b) in &iv {
                if u < b - a {
                    pick = (a, b);
                    break;
                }
                u -= b - a;
            }
            let v = quantize(pick.0 + u.min(pick.1 - pick.0));
            if self.in_region(k, v, region) {
                return Ok(v);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct So3Config {
    pub gaps: AngleGapSpec,
    pub rotation_repr: RotationRepr,
    pub euler_order: EulerOrder,
    pub apply_synonyms: bool,
}

impl Default for So3Config {
    fn default() -> Self {
        Self {
            gaps: AngleGapSpec::default(),
            rotation_repr: RotationRepr::ExtEuler,
            euler_order: EulerOrder::XYZ,
            apply_synonyms: true,
        }
    }
}

impl So3Config {
    /// Euler convention the angles are sampled in.
    pub fn convention(&self) -> EulerConvention {
        if self.rotation_repr == RotationRepr::IntEuler {
            EulerConvention::Intrinsic
        } else {
            EulerConvention::Extrinsic
        }
    }
}

pub fn gen_so3(
    n: usize,
    region: So3Region,
    seed: u64,
    cfg: &So3Config,
    par: Parallelism,
) -> Result<Vec<DatasetRecord>, DatagenError> {
    cfg.gaps.validate()?;
    if cfg.rotation_repr == RotationRepr::ScalarZ {
        return Err(DatagenError::InvalidConfig("scalar_z cannot express full rotations".into()));
    }
    for k in 0..3 {
        cfg.gaps.sample(k, region, &mut record_rng(seed, 0))?;
    }
    let catalog = Task::So3.catalog();
    let split = match region {
        So3Region::Id => Split::Train,
        So3Region::Ood => Split::ValOod,
    };
    exec::map_indexed(n, par, |i| {
        let index = i as u64;
        let mut rng = record_rng(seed, index);
        let mut angles = [0.0; 3];
        for (k, a) in angles.iter_mut().enumerate() {
            *a = cfg.gaps.sample(k, region, &mut rng)?;
        }
        let euler = EulerAngles {
            angles,
            convention: cfg.convention(),
            order: cfg.euler_order,
        };
        let object = ObjectRecord {
            shape: Some(uniform_pick(&mut rng, catalog.shapes()).clone()),
            size: Some(uniform_pick(&mut rng, catalog.sizes()).name.clone()),
            color: Some(uniform_pick(&mut rng, catalog.colors()).name.clone()),
            material: Some(uniform_pick(&mut rng, catalog.materials()).clone()),
            location: Location::Fixed,
            rotation: Some(Rotation::from_euler(&euler)),
        };
        let scene = SceneProgram::new(vec![object], CameraRecord::clevr());
        let opts = EmitOptions {
            shuffle_seed: rng.random(),
            rotation_repr: cfg.rotation_repr,
            euler_order: cfg.euler_order,
            apply_synonyms: cfg.apply_synonyms,
            scalar_z_on_cubes_only: false,
            ..EmitOptions::default()
        };
        finish_record(index, Task::So3, split, &scene, &opts)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled_angles(r: &DatasetRecord, cfg: &So3Config) -> [f64; 3] {
        let rot = r.scene.objects[0].rotation();
        rot.to_euler(cfg.convention(), cfg.euler_order).angles.map(quantize)
    }

    #[test]
    fn id_and_ood_respect_gaps() {
        for repr in [RotationRepr::ExtEuler, RotationRepr::IntEuler] {
            let cfg = So3Config {
                rotation_repr: repr,
                ..So3Config::default()
            };
            for region in [So3Region::Id, So3Region::Ood] {
                let recs = gen_so3(400, region, 3, &cfg, Parallelism::Sequential).unwrap();
                for r in &recs {
                    assert_eq!(r.reparse().unwrap(), r.scene);
                    let a = sampled_angles(r, &cfg);
                    for (k, v) in a.iter().enumerate() {
                        assert_eq!(cfg.gaps.in_gap(k, *v), region == So3Region::Ood, "{repr} {k} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn default_intervals() {
        let g = AngleGapSpec::default();
        let id = g.intervals(0, So3Region::Id);
        assert_eq!(id.len(), 4);
        let ood: f64 = g.intervals(0, So3Region::Ood).iter().map(|(a, b)| b - a).sum();
        assert!((ood - 3.0 * PI / 10.0).abs() < 1e-12);
        // only the centered gap meets the middle component's domain
        assert_eq!(g.intervals(1, So3Region::Ood).len(), 1);
    }

    #[test]
    fn empty_and_invalid_regions() {
        let none = AngleGapSpec::uniform(vec![]);
        let mut rng = record_rng(0, 0);
        assert!(matches!(none.sample(0, So3Region::Ood, &mut rng), Err(DatagenError::EmptyRegion(_))));
        let full = AngleGapSpec::uniform(vec![Gap {
            center: 0.0,
            half_width: 4.0,
        }]);
        assert!(matches!(full.sample(0, So3Region::Id, &mut rng), Err(DatagenError::EmptyRegion(_))));
        let cfg = So3Config {
            gaps: none,
            ..So3Config::default()
        };
        assert!(gen_so3(3, So3Region::Ood, 0, &cfg, Parallelism::Sequential).is_err());
        let overlap = AngleGapSpec::uniform(vec![
            Gap { center: 0.0, half_width: 0.2 },
            Gap { center: 0.3, half_width: 0.2 },
        ]);
        assert!(overlap.validate().is_err());
    }

    #[test]
    fn other_representations_reparse() {
        for repr in [RotationRepr::AxisAngle, RotationRepr::Sixd] {
            let cfg = So3Config {
                rotation_repr: repr,
                ..So3Config::default()
            };
            let recs = gen_so3(50, So3Region::Id, 1, &cfg, Parallelism::Sequential).unwrap();
            for r in &recs {
                assert_eq!(r.reparse().unwrap(), r.scene);
                assert_eq!(r.scene.objects[0].location, Location::Fixed);
            }
        }
    }
}

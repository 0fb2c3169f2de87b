use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{
    finish_record, quantized_uniform, record_rng, spread_positions, uniform_pick, DatagenError,
    DatasetRecord, Split, Task,
};
use crate::dsl::EmitOptions;
use crate::exec::{self, Parallelism};
use crate::rotation::{Rotation, RotationRepr};
use crate::scene::{CameraRecord, Location, ObjectRecord, Primitive, SceneProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scene6dofSplit {
    TrainSolid,
    OodTextureMarker,
    OodShapeMarker,
}

impl Scene6dofSplit {
    pub fn name(self) -> &'static str {
        match self {
            Scene6dofSplit::TrainSolid => "train_solid",
            Scene6dofSplit::OodTextureMarker => "ood_texture_marker",
            Scene6dofSplit::OodShapeMarker => "ood_shape_marker",
        }
    }
}

impl std::str::FromStr for Scene6dofSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Scene6dofSplit::TrainSolid,
            Scene6dofSplit::OodTextureMarker,
            Scene6dofSplit::OodShapeMarker,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown scene6dof split `{s}`"))
    }
}

/// Every fifth asset id of each category is reserved for the held-out-shape split.
pub fn is_held_out_shape(name: &str) -> bool {
    name.rsplit_once('_')
        .and_then(|(_, id)| id.parse::<u32>().ok())
        .is_some_and(|id| id % 5 == 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scene6dofConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub extent: f64,
    pub min_distance: f64,
    /// Camera elevation range, degrees.
    pub pitch_deg: (f64, f64),
    pub radius: (f64, f64),
}

impl Default for Scene6dofConfig {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 5,
            extent: 3.5,
            min_distance: 1.1,
            pitch_deg: (20.0, 40.0),
            radius: (10.0, 14.0),
        }
    }
}

impl Scene6dofConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let ok = self.min_objects >= 1
            && self.min_objects <= self.max_objects
            && self.extent > 0.0
            && (self.max_objects as f64) <= ((2.0 * self.extent / self.min_distance).floor().powi(2)) / 2.0
            && self.pitch_deg.0 <= self.pitch_deg.1
            && self.radius.0 > 0.0
            && self.radius.0 <= self.radius.1;
        if ok {
            Ok(())
        } else {
            Err(DatagenError::InvalidConfig("invalid scene6dof ranges".into()))
        }
    }
}

pub fn gen_scene6dof(
    n: usize,
    variant: Scene6dofSplit,
    seed: u64,
    cfg: &Scene6dofConfig,
    par: Parallelism,
) -> Result<Vec<DatasetRecord>, DatagenError> {
    cfg.validate()?;
    let catalog = Task::Scene6dof.catalog();
    let held_out = variant == Scene6dofSplit::OodShapeMarker;
    let shapes: Vec<&String> = catalog
        .shapes()
        .iter()
        .filter(|s| is_held_out_shape(s) == held_out)
        .collect();
    let split = match variant {
        Scene6dofSplit::TrainSolid => Split::Train,
        _ => Split::ValOod,
    };
    exec::map_indexed(n, par, |i| {
        let index = i as u64;
        let mut rng = record_rng(seed, index);
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let positions = spread_positions(&mut rng, count, cfg.extent, cfg.min_distance);
        let mut objects = Vec::with_capacity(count);
        for [x, y] in positions {
            let shape = (*uniform_pick(&mut rng, &shapes)).clone();
            // rest on the floor
            let z = match Primitive::for_shape(&shape, 1.0) {
                Ok(Primitive::Box { half }) => crate::dsl::quantize(half[2]),
                _ => 0.0,
            };
            let color = uniform_pick(&mut rng, catalog.colors()).name.clone();
            let yaw = quantized_uniform(&mut rng, -PI, PI);
            objects.push(ObjectRecord {
                shape: Some(shape),
                size: None,
                color: Some(color),
                material: None,
                location: Location::Point([x, y, z]),
                rotation: Some(Rotation::rz(yaw)),
            });
        }
        let pitch = rng.random_range(cfg.pitch_deg.0..=cfg.pitch_deg.1).to_radians();
        let radius = rng.random_range(cfg.radius.0..=cfg.radius.1);
        let scene = SceneProgram::new(objects, CameraRecord::orbit(pitch, radius, [0.0; 3]));
        let opts = EmitOptions {
            shuffle_seed: rng.random(),
            rotation_repr: RotationRepr::Sixd,
            scalar_z_on_cubes_only: false,
            ..EmitOptions::default()
        };
        let mut rec = finish_record(index, Task::Scene6dof, split, &scene, &opts)?;
        rec.variant = Some(variant.name().to_string());
        Ok(rec)
    })
    .into_iter()
    .collect()
}

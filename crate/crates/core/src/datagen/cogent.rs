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
use crate::scene::{CameraRecord, Location, ObjectRecord, SceneProgram};

const SET_A: [&str; 4] = ["gray", "blue", "brown", "yellow"];
const SET_B: [&str; 4] = ["red", "green", "purple", "cyan"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoGenTCondition {
    A,
    B,
}

impl CoGenTCondition {
    pub fn cube_colors(self) -> &'static [&'static str] {
        match self {
            CoGenTCondition::A => &SET_A,
            CoGenTCondition::B => &SET_B,
        }
    }

    pub fn cylinder_colors(self) -> &'static [&'static str] {
        match self {
            CoGenTCondition::A => &SET_B,
            CoGenTCondition::B => &SET_A,
        }
    }

    /// Colors allowed for `shape`; `None` for unconstrained shapes.
    pub fn allowed_colors(self, shape: &str) -> Option<&'static [&'static str]> {
        match shape {
            "cube" => Some(self.cube_colors()),
            "cylinder" => Some(self.cylinder_colors()),
            _ => None,
        }
    }
}

impl std::str::FromStr for CoGenTCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(CoGenTCondition::A),
            "B" | "b" => Ok(CoGenTCondition::B),
            _ => Err(format!("unknown condition `{s}` (expected A or B)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CogentConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Objects are placed in `[-extent, extent]²`.
    pub extent: f64,
    pub min_distance: f64,
    pub apply_synonyms: bool,
}

impl Default for CogentConfig {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 10,
            extent: 3.0,
            min_distance: 1.1,
            apply_synonyms: true,
        }
    }
}

impl CogentConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return Err(DatagenError::InvalidConfig("object count range is empty".into()));
        }
        // Loose packing bound so rejection sampling terminates.
        let cells = (2.0 * self.extent / self.min_distance).floor().powi(2);
        if !(self.extent > 0.0) || (self.max_objects as f64) > cells / 2.0 {
            return Err(DatagenError::InvalidConfig("too many objects for the floor area".into()));
        }
        Ok(())
    }
}

pub fn gen_cogent(
    n: usize,
    cond: CoGenTCondition,
    seed: u64,
    split: Split,
    cfg: &CogentConfig,
    par: Parallelism,
) -> Result<Vec<DatasetRecord>, DatagenError> {
    cfg.validate()?;
    let catalog = Task::Cogent.catalog();
    exec::map_indexed(n, par, |i| {
        let index = i as u64;
        let mut rng = record_rng(seed, index);
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let positions = spread_positions(&mut rng, count, cfg.extent, cfg.min_distance);
        let objects = positions
            .into_iter()
            .map(|[x, y]| {
                let shape = uniform_pick(&mut rng, catalog.shapes()).clone();
                let color = match cond.allowed_colors(&shape) {
                    Some(allowed) => uniform_pick(&mut rng, allowed).to_string(),
                    None => uniform_pick(&mut rng, catalog.colors()).name.clone(),
                };
                let size = uniform_pick(&mut rng, catalog.sizes()).clone();
                let material = uniform_pick(&mut rng, catalog.materials()).clone();
                let rotation = (shape == "cube")
                    .then(|| Rotation::rz(quantized_uniform(&mut rng, -PI, PI)));
                ObjectRecord {
                    location: Location::Point([x, y, size.scale]),
                    shape: Some(shape),
                    size: Some(size.name),
                    color: Some(color),
                    material: Some(material),
                    rotation,
                }
            })
            .collect();
        let scene = SceneProgram::new(objects, CameraRecord::clevr());
        let opts = EmitOptions {
            shuffle_seed: rng.random(),
            rotation_repr: RotationRepr::ScalarZ,
            apply_synonyms: cfg.apply_synonyms,
            ..EmitOptions::default()
        };
        finish_record(index, Task::Cogent, split, &scene, &opts)
    })
    .into_iter()
    .collect()
}

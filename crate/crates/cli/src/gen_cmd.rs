use clap::Args;
use std::path::PathBuf;

use crate::config::data_root;
use crate::error::CliError;
use crate::manifest::OutputDir;
use crate::Ctx;
use derender_core::datagen::{
    gen_cogent, gen_dot2d, gen_scene6dof, gen_so3, write_dot_images, write_jsonl, CoGenTCondition, DotDistribution,
    Scene6dofSplit, So3Region, Split, Task,
};

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub n: usize,
    /// Output directory (default: $DERENDER_DATA_DIR/<task>_<label>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// cogent: split label stored on the records.
    #[arg(long, default_value = "train")]
    pub split: Split,
    /// cogent: colour/shape condition.
    #[arg(long, default_value = "A")]
    pub condition: CoGenTCondition,
    /// dot2d: checkerboard (train) or uniform (validation).
    #[arg(long, value_parser = parse_dist, default_value = "checkerboard")]
    pub dist: DotDistribution,
    /// so3: in-distribution or gap angles.
    #[arg(long, value_parser = parse_region, default_value = "id")]
    pub region: So3Region,
    /// scene6dof: train_solid, ood_texture_marker or ood_shape_marker.
    #[arg(long, default_value = "train_solid")]
    pub variant: Scene6dofSplit,
}

fn parse_dist(s: &str) -> Result<DotDistribution, String> {
    match s {
        "checkerboard" => Ok(DotDistribution::Checkerboard),
        "uniform" => Ok(DotDistribution::Uniform),
        _ => Err(format!("unknown distribution {s:?}")),
    }
}

fn parse_region(s: &str) -> Result<So3Region, String> {
    match s {
        "id" => Ok(So3Region::Id),
        "ood" => Ok(So3Region::Ood),
        _ => Err(format!("unknown region {s:?}")),
    }
}

impl GenArgs {
    fn label(&self) -> String {
        match self.task {
            Task::Cogent => format!("{}_{:?}", self.split.name(), self.condition),
            Task::Dot2d => format!("{:?}", self.dist).to_lowercase(),
            Task::So3 => format!("{:?}", self.region).to_lowercase(),
            Task::Scene6dof => self.variant.name().to_string(),
        }
    }
}

pub fn run(ctx: &Ctx, a: &GenArgs) -> Result<(), CliError> {
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| data_root().join(format!("{}_{}", a.task.name(), a.label())));
    let cfg = &ctx.config;
    let (records, task_cfg) = match a.task {
        Task::Cogent => (
            gen_cogent(a.n, a.condition, ctx.seed, a.split, &cfg.cogent, ctx.par)?,
            serde_json::to_value(cfg.cogent)?,
        ),
        Task::Dot2d => (
            gen_dot2d(a.n, a.dist, ctx.seed, &cfg.dot2d, ctx.par)?,
            serde_json::to_value(cfg.dot2d)?,
        ),
        Task::So3 => (
            gen_so3(a.n, a.region, ctx.seed, &cfg.so3, ctx.par)?,
            serde_json::to_value(&cfg.so3)?,
        ),
        Task::Scene6dof => (
            gen_scene6dof(a.n, a.variant, ctx.seed, &cfg.scene6dof, ctx.par)?,
            serde_json::to_value(cfg.scene6dof)?,
        ),
    };
    let out = OutputDir::create(&dir)?;
    write_jsonl(&out.path(RECORDS_FILE), &records)?;
    let mut outputs = vec![RECORDS_FILE];
    if a.task == Task::Dot2d {
        write_dot_images(&out.dir, &records, &cfg.dot2d, ctx.par)?;
        outputs.push("images/");
    }
    let config = serde_json::json!({
        "task": a.task,
        "n": a.n,
        "label": a.label(),
        "generator": task_cfg,
    });
    out.finish(ctx, config, Vec::new(), &outputs)?;
    eprintln!("wrote {} records to {}", records.len(), dir.display());
    Ok(())
}

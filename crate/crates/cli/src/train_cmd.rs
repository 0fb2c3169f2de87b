use clap::Args;
use std::path::{Path, PathBuf};

use crate::config::data_path;
use crate::error::CliError;
use crate::gen_cmd::RECORDS_FILE;
use crate::manifest::OutputDir;
use crate::Ctx;
use derender_core::datagen::{read_jsonl, DatasetRecord, Raster};
use derender_core::exec::{self, Parallelism};
use derender_core::numstream::{build_vocabulary, NumMode};
use derender_core::toynet::{
    save_checkpoint, train, write_metrics_csv, Checkpoint, ModelConfig, TrainItem,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub mode: NumMode,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional validation dataset directory.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured step count.
    #[arg(long)]
    pub steps: Option<usize>,
}

pub fn load_records(dir: &Path) -> Result<(PathBuf, Vec<DatasetRecord>), CliError> {
    let dir = data_path(dir);
    let recs = read_jsonl(&dir.join(RECORDS_FILE)).map_err(|e| CliError::data(e).context(dir.display()))?;
    if recs.is_empty() {
        return Err(CliError::data(anyhow::anyhow!("{}: no records", dir.display())));
    }
    Ok((dir, recs))
}

pub fn load_items(dir: &Path, recs: &[DatasetRecord], par: Parallelism) -> Result<Vec<TrainItem>, CliError> {
    exec::map_slice(recs, par, |r| TrainItem::from_record(r, dir))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::data(e))
}

/// Pixel count of the dataset's rasters (1 when it has none).
pub fn raster_pixels(dir: &Path, recs: &[DatasetRecord]) -> Result<usize, CliError> {
    match &recs[0].image {
        Some(rel) => {
            let r = Raster::read_png(&dir.join(rel))?;
            Ok((r.size * r.size) as usize)
        }
        None => Ok(1),
    }
}

pub fn run(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let (dir, recs) = load_records(&a.data)?;
    let task = recs[0].task;
    if recs.iter().any(|r| r.task != task) {
        return Err(CliError::data(anyhow::anyhow!("dataset mixes tasks")));
    }
    let items = load_items(&dir, &recs, ctx.par)?;
    let val_items = match &a.val {
        Some(v) => {
            let (vdir, vrecs) = load_records(v)?;
            load_items(&vdir, &vrecs, ctx.par)?
        }
        None => Vec::new(),
    };
    let vocab = build_vocabulary(task.catalog(), a.mode);
    let mut mcfg = ModelConfig::new(a.mode, vocab.len(), raster_pixels(&dir, &recs)?);
    ctx.config.model.apply(&mut mcfg);
    let mut tcfg = ctx.config.train.clone();
    tcfg.seed = ctx.seed;
    if let Some(s) = a.steps {
        tcfg.steps = s;
    }
    let out = OutputDir::create(&a.out)?;
    let mut last_step = 0;
    let outcome = train(mcfg.clone(), &tcfg, vocab, &items, &val_items, ctx.par, |row| {
        last_step = row.step;
        let val = row.val_metric.map(|v| format!(" val {v:.6}")).unwrap_or_default();
        eprintln!("step {} ce {:.5} mse {:.5}{val}", row.step, row.ce, row.mse);
    })
    .map_err(|e| CliError::from(e).context(format!("last logged finite step {last_step}")))?;
    write_metrics_csv(&out.path(METRICS_FILE), &outcome.trace)?;
    save_checkpoint(&out.path(CHECKPOINT_FILE), &Checkpoint::from(outcome))?;
    let mut inputs = vec![dir];
    inputs.extend(a.val.iter().map(|v| data_path(v)));
    let config = serde_json::json!({
        "task": task,
        "mode": a.mode,
        "model": mcfg,
        "train": tcfg,
    });
    out.finish(ctx, config, inputs, &[CHECKPOINT_FILE, METRICS_FILE])?;
    Ok(())
}

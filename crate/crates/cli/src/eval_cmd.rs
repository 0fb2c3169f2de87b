use clap::Args;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::manifest::OutputDir;
use crate::train_cmd::{load_items, load_records};
use crate::Ctx;
use derender_core::datagen::{dot_position, DatasetRecord, Task};
use derender_core::dsl::{self, ProgramText};
use derender_core::eval::{
    evaluate, memorization_ratio, position_rmse, three_decimal_domain, EvalOptions, MetricAttr, MetricReport,
};
use derender_core::exec;
use derender_core::numstream::numeric_fields;
use derender_core::scene::{Location, SceneProgram};
use derender_core::toynet::{greedy_generate, load_checkpoint};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth dataset directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// JSONL of predicted programs (`{"index": .., "program": ..}` per line).
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    pub pred: Option<PathBuf>,
    /// Decode predictions from this checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training dataset directory, for the value-memorization ratio.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub index: u64,
    pub program: ProgramText,
    #[serde(default = "yes")]
    pub finished: bool,
}

fn num(v: f64) -> String {
    dsl::format_number(v).unwrap_or_else(|_| v.to_string())
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Memorization {
    pub ratio: f64,
    pub hits_in_train: usize,
    pub predictions: usize,
    pub train_values: usize,
    pub value_domain: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub overall: MetricReport,
    pub by_split: BTreeMap<String, MetricReport>,
    /// dot2d only: RMSE of the decoded position per split and overall.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub position_rmse: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memorization: Option<Memorization>,
}

fn split_label(r: &DatasetRecord) -> String {
    r.variant.clone().unwrap_or_else(|| r.split.name().to_string())
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::data(e).context(path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line)
            .map_err(|e| CliError::data(anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// The numbers of a program joined with commas, e.g. `0.292,0.266`.
pub fn value_signature(text: &str) -> String {
    numeric_fields(text)
        .iter()
        .map(|(_, v)| num(*v))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn run(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let (gt_dir, gts) = load_records(&a.gt)?;
    let task = gts[0].task;
    let settings = &ctx.config.eval;
    let preds: Vec<Prediction> = match (&a.pred, &a.checkpoint) {
        (Some(p), _) => read_predictions(p)?,
        (None, Some(ck)) => {
            let ck = load_checkpoint(ck).map_err(|e| CliError::from(e).context(ck.display()))?;
            let items = load_items(&gt_dir, &gts, ctx.par)?;
            let model = &ck.model;
            exec::map_indexed(gts.len(), ctx.par, |k| {
                greedy_generate(model, &items[k].pixels_as()).map(|g| Prediction {
                    index: gts[k].index,
                    program: g.text,
                    finished: g.finished,
                })
            })
            .into_iter()
            .collect::<Result<_, _>>()?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let by_index: BTreeMap<u64, &Prediction> = preds.iter().map(|p| (p.index, p)).collect();
    if by_index.len() != preds.len() {
        return Err(CliError::data(anyhow::anyhow!("duplicate prediction indices")));
    }
    let mut malformed_log = String::new();
    let scenes: Vec<Option<SceneProgram>> = gts
        .iter()
        .map(|g| {
            let Some(p) = by_index.get(&g.index) else {
                malformed_log.push_str(&format!("{}\tmissing prediction\n", g.index));
                return None;
            };
            if !p.finished {
                malformed_log.push_str(&format!("{}\tno end token\n", g.index));
                return None;
            }
            match dsl::parse_program_with(&p.program, task.catalog(), &g.parse_options()) {
                Ok(s) => Some(s),
                Err(e) => {
                    malformed_log.push_str(&format!("{}\t{e}\n", g.index));
                    None
                }
            }
        })
        .collect();
    if by_index.len() > gts.len() || preds.iter().any(|p| !gts.iter().any(|g| g.index == p.index)) {
        return Err(CliError::data(anyhow::anyhow!("predictions reference unknown ground-truth indices")));
    }

    let opts = EvalOptions {
        attrs: MetricAttr::ALL.to_vec(),
        rotations: task != Task::Dot2d,
        chamfer: task != Task::Dot2d,
        points_per_object: settings.points_per_object,
        seed: ctx.seed,
        ..EvalOptions::default()
    };
    let gt_scenes: Vec<SceneProgram> = gts.iter().map(|g| g.scene.clone()).collect();
    let catalog = task.catalog();
    let overall = evaluate(&scenes, &gt_scenes, catalog, &opts, ctx.par)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, g) in gts.iter().enumerate() {
        groups.entry(split_label(g)).or_default().push(k);
    }
    let mut by_split = BTreeMap::new();
    for (label, idx) in &groups {
        let p: Vec<_> = idx.iter().map(|&k| scenes[k].clone()).collect();
        let g: Vec<_> = idx.iter().map(|&k| gt_scenes[k].clone()).collect();
        by_split.insert(label.clone(), evaluate(&p, &g, catalog, &opts, ctx.par)?);
    }

    let out = OutputDir::create(&a.out)?;
    let mut outputs = vec!["report.json", "report.csv", "per_scene.csv", "malformed.log"];
    let mut position_rmse_map = BTreeMap::new();
    let mut memorization = None;
    let planar = |s: &SceneProgram| match s.objects.first().map(|o| o.location) {
        Some(Location::Planar(p)) if s.len() == 1 => Some(p),
        _ => None,
    };
    if task == Task::Dot2d {
        let pred_pos: Vec<Option<[f64; 2]>> = scenes.iter().map(|s| s.as_ref().and_then(planar)).collect();
        let gt_pos: Vec<[f64; 2]> = gts
            .iter()
            .map(|g| dot_position(g).ok_or_else(|| CliError::data(anyhow::anyhow!("record {} has no dot", g.index))))
            .collect::<Result<_, _>>()?;
        let fb = settings.fallback_position;
        position_rmse_map.insert("all".to_string(), position_rmse(&pred_pos, &gt_pos, fb)?);
        for (label, idx) in &groups {
            let p: Vec<_> = idx.iter().map(|&k| pred_pos[k]).collect();
            let g: Vec<_> = idx.iter().map(|&k| gt_pos[k]).collect();
            position_rmse_map.insert(label.clone(), position_rmse(&p, &g, fb)?);
        }
        let mut csv = String::from("index,split,gt_x,gt_y,pred_x,pred_y\n");
        for (k, g) in gts.iter().enumerate() {
            let (px, py) = pred_pos[k].map_or((String::new(), String::new()), |p| (num(p[0]), num(p[1])));
            csv.push_str(&format!(
                "{},{},{},{},{px},{py}\n",
                g.index,
                split_label(g),
                num(gt_pos[k][0]),
                num(gt_pos[k][1])
            ));
        }
        std::fs::write(out.path("positions.csv"), csv)?;
        outputs.push("positions.csv");
        if let Some(train_dir) = &a.train {
            let (_, train) = load_records(train_dir)?;
            let train_values: HashSet<String> = train.iter().map(|r| value_signature(r.program.as_str())).collect();
            // OOD predictions when the set has them, otherwise all of them
            let ood: Vec<usize> = (0..gts.len()).filter(|&k| split_label(&gts[k]) == "val_ood").collect();
            let pool = if ood.is_empty() { (0..gts.len()).collect() } else { ood };
            let predicted: Vec<String> = pool
                .iter()
                .filter_map(|&k| pred_pos[k].map(|p| format!("{},{}", num(p[0]), num(p[1]))))
                .collect();
            let domain = three_decimal_domain(0.0, 1.0).pow(2);
            match memorization_ratio(&predicted, &train_values, domain) {
                Ok(ratio) => {
                    memorization = Some(Memorization {
                        ratio,
                        hits_in_train: predicted.iter().filter(|v| train_values.contains(*v)).count(),
                        predictions: predicted.len(),
                        train_values: train_values.len(),
                        value_domain: domain,
                    })
                }
                Err(e) => eprintln!("memorization ratio skipped: {e}"),
            }
        }
    }
    let report = EvalOutput {
        overall,
        by_split,
        position_rmse: position_rmse_map,
        memorization,
    };
    std::fs::write(out.path("report.json"), serde_json::to_vec_pretty(&report)?)?;
    let mut csv = format!("split,{}\n", MetricReport::csv_header());
    csv.push_str(&format!("all,{}\n", report.overall.csv_row()));
    for (label, r) in &report.by_split {
        csv.push_str(&format!("{label},{}\n", r.csv_row()));
    }
    std::fs::write(out.path("report.csv"), csv)?;
    let mut per = String::from("index,split,n_pred,n_gt,malformed\n");
    for (k, g) in gts.iter().enumerate() {
        per.push_str(&format!(
            "{},{},{},{},{}\n",
            g.index,
            split_label(g),
            scenes[k].as_ref().map_or(0, |s| s.len()),
            g.scene.len(),
            u8::from(scenes[k].is_none())
        ));
    }
    std::fs::write(out.path("per_scene.csv"), per)?;
    std::fs::write(out.path("malformed.log"), malformed_log)?;
    if a.checkpoint.is_some() {
        let mut lines = String::new();
        for p in &preds {
            lines.push_str(&serde_json::to_string(p)?);
            lines.push('\n');
        }
        std::fs::write(out.path("predictions.jsonl"), lines)?;
        outputs.push("predictions.jsonl");
    }
    let mut inputs = vec![gt_dir];
    inputs.extend(a.pred.iter().cloned());
    inputs.extend(a.checkpoint.iter().cloned());
    inputs.extend(a.train.iter().cloned());
    let config = serde_json::json!({ "task": task, "eval": settings, "options": opts });
    out.finish(ctx, config, inputs, &outputs)?;
    eprintln!(
        "l2 {:?} count {} malformed {}",
        report.overall.l2, report.overall.count_error, report.overall.malformed_rate
    );
    Ok(())
}

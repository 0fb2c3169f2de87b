use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::generate::greedy_generate;
use super::model::{batch_grad, Example};
use super::{c, Model, ModelConfig, Real, ToynetError, Tx};
use crate::datagen::{DatasetRecord, Raster};
use crate::dsl::ProgramText;
use crate::exec::Parallelism;
use crate::numstream::{self, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyStat {
    pub mean: f64,
    pub std: f64,
}

/// Per-family standardization of numeric slots, fit on training programs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotStats {
    pub families: BTreeMap<String, FamilyStat>,
}

impl SlotStats {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut acc: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
        for t in texts {
            for (fam, v) in numstream::numeric_fields(t) {
                let e = acc.entry(fam).or_insert((0.0, 0.0, 0));
                e.0 += v;
                e.1 += v * v;
                e.2 += 1;
            }
        }
        let families = acc
            .into_iter()
            .map(|(fam, (s, s2, n))| {
                let n = n as f64;
                let mean = s / n;
                let var = (s2 / n - mean * mean).max(0.0);
                let std = if var.sqrt() > 1e-6 { var.sqrt() } else { 1.0 };
                (fam, FamilyStat { mean, std })
            })
            .collect();
        Self { families }
    }

    fn get(&self, family: &str) -> FamilyStat {
        self.families
            .get(family)
            .copied()
            .unwrap_or(FamilyStat { mean: 0.0, std: 1.0 })
    }

    pub fn mean(&self, family: &str) -> f64 {
        self.get(family).mean
    }

    pub fn standardize(&self, family: &str, v: f64) -> f64 {
        let s = self.get(family);
        (v - s.mean) / s.std
    }

    pub fn destandardize(&self, family: &str, z: f64) -> f64 {
        let s = self.get(family);
        z * s.std + s.mean
    }
}

/// A program with the sparse raster it is decoded from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub pixels: Vec<(u32, f32)>,
    pub text: ProgramText,
}

impl TrainItem {
    pub fn from_raster(raster: &Raster, text: ProgramText) -> Self {
        let pixels = raster
            .deficit()
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v > 0.0)
            .map(|(i, v)| (i as u32, v))
            .collect();
        Self { pixels, text }
    }

    /// Loads the record's image (relative to `root`); records without one
    /// get an empty raster.
    pub fn from_record(rec: &DatasetRecord, root: &Path) -> Result<Self, ToynetError> {
        match &rec.image {
            Some(rel) => {
                let raster = Raster::read_png(&root.join(rel))
                    .map_err(|e| ToynetError::InvalidConfig(format!("{rel}: {e}")))?;
                Ok(Self::from_raster(&raster, rec.program.clone()))
            }
            None => Ok(Self {
                pixels: Vec::new(),
                text: rec.program.clone(),
            }),
        }
    }

    pub fn pixels_as<T: Real>(&self) -> Vec<(u32, T)> {
        self.pixels.iter().map(|&(i, v)| (i, c(f64::from(v)))).collect()
    }
}

pub fn build_examples<T: Real>(
    items: &[TrainItem],
    vocab: &Vocabulary,
    stats: &SlotStats,
) -> Result<Vec<Example<T>>, ToynetError> {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let s = numstream::encode(&item.text, vocab, vocab.mode()).map_err(|e| ToynetError::SlotMismatch {
                example: i,
                msg: e.to_string(),
            })?;
            let mut input = vec![vocab.bos()];
            input.extend(&s.ids);
            let mut targets = s.ids.clone();
            targets.push(vocab.eos());
            let slots = s
                .slots
                .iter()
                .map(|sl| (sl.position, c(stats.standardize(&sl.family, sl.value))))
                .collect();
            Ok(Example {
                pixels: item.pixels_as(),
                input,
                targets,
                slots,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear warmup, then cosine decay to `min_frac` of the peak rate.
    WarmupCosine { warmup: usize, min_frac: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub grad_clip: f64,
    pub seed: u64,
    pub w_ce: f64,
    pub w_mse: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Decoupled weight decay on matrices (AdamW); biases, norms and
    /// embeddings are exempt.
    pub weight_decay: f64,
    pub log_every: usize,
    /// Validation programs decoded at every log step.
    pub val_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            steps: 1000,
            learning_rate: 2e-3,
            schedule: LrSchedule::WarmupCosine {
                warmup: 100,
                min_frac: 0.05,
            },
            grad_clip: 1.0,
            seed: 1,
            w_ce: 1.0,
            w_mse: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            log_every: 100,
            val_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ToynetError> {
        let ok = self.batch_size > 0
            && self.steps > 0
            && self.learning_rate > 0.0
            && self.w_ce > 0.0
            && self.w_mse > 0.0
            && self.log_every > 0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(ToynetError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::WarmupCosine { warmup, min_frac } => {
                if step < warmup {
                    self.learning_rate * (step + 1) as f64 / warmup as f64
                } else {
                    let span = (self.steps - warmup.min(self.steps)).max(1) as f64;
                    let progress = ((step - warmup) as f64 / span).min(1.0);
                    let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                    self.learning_rate * (min_frac + (1.0 - min_frac) * cos)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub ce: f64,
    pub mse: f64,
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub adam_m: Vec<f32>,
    pub adam_v: Vec<f32>,
    pub steps_done: usize,
    pub trace: Vec<MetricRow>,
}

/// Mean squared error of the numbers decoded greedily from each image
/// against the numbers of its program. A number the decode failed to
/// produce is predicted by its family's training mean.
pub fn decoded_value_mse<T: Real>(model: &Model<T>, items: &[TrainItem]) -> Result<f64, ToynetError> {
    let (mut sq, mut n) = (0.0, 0usize);
    for item in items {
        let g = greedy_generate(model, &item.pixels_as())?;
        let target = numstream::numeric_fields(item.text.as_str());
        let pred = if g.finished {
            numstream::numeric_fields(g.text.as_str())
        } else {
            Vec::new()
        };
        let aligned = pred.len() == target.len();
        for (k, (fam, v)) in target.iter().enumerate() {
            let p = if aligned { pred[k].1 } else { model.stats.mean(fam) };
            sq += (p - v).powi(2);
            n += 1;
        }
    }
    Ok(if n > 0 { sq / n as f64 } else { 0.0 })
}

/// Minibatch Adam training. Deterministic for a fixed config; the result
/// does not depend on `par`.
pub fn train(
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    vocab: Vocabulary,
    train_items: &[TrainItem],
    val_items: &[TrainItem],
    par: Parallelism,
    mut on_log: impl FnMut(&MetricRow),
) -> Result<TrainOutcome, ToynetError> {
    cfg.validate()?;
    if train_items.is_empty() {
        return Err(ToynetError::EmptyDataset);
    }
    let stats = SlotStats::fit(train_items.iter().map(|i| i.text.as_str()));
    let mut model = Model::<f32>::init(model_cfg, vocab, stats, cfg.seed)?;
    let examples: Vec<Example<f32>> = build_examples(train_items, &model.vocab, &model.stats)?;
    if let Some(ex) = examples.iter().find(|e| e.positions() > model.config.context_len) {
        return Err(ToynetError::ContextOverflow {
            len: ex.positions(),
            context: model.config.context_len,
        });
    }
    let val = &val_items[..cfg.val_size.min(val_items.len())];
    let np = model.params.len();
    let decayed: Vec<Tx> = model
        .layout
        .tensors
        .iter()
        .filter(|(name, t)| t.rows > 1 && t.cols > 1 && !name.ends_with("_emb"))
        .map(|(_, t)| *t)
        .collect();
    let mut adam_m = vec![0f32; np];
    let mut adam_v = vec![0f32; np];
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut trace = Vec::new();
    let (mut ce_acc, mut mse_acc, mut acc_n) = (0.0, 0.0, 0usize);
    let mut batch: Vec<Example<f32>> = Vec::with_capacity(cfg.batch_size);
    for step in 0..cfg.steps {
        batch.clear();
        while batch.len() < cfg.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(examples[order[cursor]].clone());
            cursor += 1;
        }
        let (lp, mut grad) = batch_grad(&model, &batch, cfg.w_ce, cfg.w_mse, par)?;
        if !lp.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(ToynetError::DivergenceDetected { step });
        }
        let norm = grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>().sqrt();
        if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
            let s = (cfg.grad_clip / norm) as f32;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        let t = (step + 1) as i32;
        let lr = cfg.lr_at(step);
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let step_size = (lr / bc1) as f32;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let inv_bc2 = (1.0 / bc2) as f32;
        let eps = cfg.adam_eps as f32;
        for (((p, g), m), v) in model.params.iter_mut().zip(&grad).zip(&mut adam_m).zip(&mut adam_v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
        }
        if cfg.weight_decay > 0.0 {
            let keep = (1.0 - lr * cfg.weight_decay) as f32;
            for t in &decayed {
                t.of_mut(&mut model.params).iter_mut().for_each(|p| *p *= keep);
            }
        }
        if !model.is_finite() {
            return Err(ToynetError::DivergenceDetected { step });
        }
        ce_acc += lp.ce;
        mse_acc += lp.mse;
        acc_n += 1;
        if (step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps {
            let val_metric = if val.is_empty() {
                None
            } else {
                Some(decoded_value_mse(&model, val)?)
            };
            let row = MetricRow {
                step: step + 1,
                ce: ce_acc / acc_n as f64,
                mse: mse_acc / acc_n as f64,
                val_metric,
            };
            on_log(&row);
            trace.push(row);
            (ce_acc, mse_acc, acc_n) = (0.0, 0.0, 0);
        }
    }
    Ok(TrainOutcome {
        model,
        adam_m,
        adam_v,
        steps_done: cfg.steps,
        trace,
    })
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,ce,mse,val_metric")?;
    for r in rows {
        let val = r.val_metric.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.step, r.ce, r.mse, val)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numstream::{build_vocabulary, NumMode};
    use crate::scene::AttributeCatalog;
    use crate::toynet::{EncoderConfig, Precision};

    fn dot_items(n: usize, seed: u64) -> Vec<TrainItem> {
        let cfg = crate::datagen::Dot2dConfig {
            image_size: 16,
            radius: 2.0,
            ..Default::default()
        };
        crate::datagen::gen_dot2d(n, crate::datagen::DotDistribution::Uniform, seed, &cfg, Parallelism::Sequential)
            .unwrap()
            .iter()
            .map(|r| {
                let raster = crate::datagen::render_dot_record(r, &cfg).unwrap();
                TrainItem::from_raster(&raster, r.program.clone())
            })
            .collect()
    }

    fn small_cfg(mode: NumMode, vocab: usize) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig::RasterMlp { pixels: 256, hidden: 32 },
            embed_dim: 16,
            decoder_layers: 1,
            heads: 2,
            mlp_ratio: 2,
            context_len: 32,
            mode,
            numeric_head_hidden: 16,
            vocab_size: vocab,
            precision: Precision::Single,
        }
    }

    #[test]
    fn stats_standardize_round_trip() {
        let s = SlotStats::fit(["add(x=0.100, y=0.300)\n", "add(x=0.300, y=0.300)\n"]);
        assert!((s.mean("x") - 0.2).abs() < 1e-12);
        assert_eq!(s.families["y"].std, 1.0);
        let z = s.standardize("x", 0.25);
        assert!((s.destandardize("x", z) - 0.25).abs() < 1e-12);
        assert_eq!(s.mean("unseen"), 0.0);
    }

    #[test]
    fn schedule_shape() {
        let cfg = TrainConfig {
            steps: 1000,
            learning_rate: 1.0,
            ..TrainConfig::default()
        };
        assert!((cfg.lr_at(0) - 0.01).abs() < 1e-12);
        assert!((cfg.lr_at(99) - 1.0).abs() < 1e-12);
        assert!(cfg.lr_at(500) < cfg.lr_at(200));
        assert!((cfg.lr_at(999) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn short_training_is_deterministic_and_learns() {
        let items = dot_items(64, 1);
        let vocab = build_vocabulary(AttributeCatalog::clevr(), NumMode::Float);
        let mcfg = small_cfg(NumMode::Float, vocab.len());
        let tcfg = TrainConfig {
            batch_size: 8,
            steps: 60,
            log_every: 20,
            val_size: 4,
            ..TrainConfig::default()
        };
        let run = |par| train(mcfg.clone(), &tcfg, vocab.clone(), &items, &items, par, |_| {}).unwrap();
        let a = run(Parallelism::Sequential);
        let b = run(Parallelism::Rayon);
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 3);
        assert!(a.trace[2].ce < a.trace[0].ce);
    }

    #[test]
    fn non_positive_weights_are_rejected() {
        let cfg = TrainConfig {
            w_mse: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rows = [
            MetricRow { step: 10, ce: 1.5, mse: 0.25, val_metric: None },
            MetricRow { step: 20, ce: 1.0, mse: 0.125, val_metric: Some(0.5) },
        ];
        write_metrics_csv(&p, &rows).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "step,ce,mse,val_metric\n10,1.5,0.25,\n20,1,0.125,0.5\n"
        );
    }
}

//! Small autoregressive program decoder with a regression head for `[NUM]`
//! slots, trained from scratch on rasterized scenes.

mod checkpoint;
mod generate;
mod gradcheck;
pub mod linalg;
mod model;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use generate::{greedy_generate, Generation};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{batch_grad, batch_loss, forward, Example, ForwardOutput, LossParts, GRAD_CHUNK};
pub use train::{
    build_examples, decoded_value_mse, train, write_metrics_csv, FamilyStat, LrSchedule, MetricRow, SlotStats,
    TrainConfig, TrainItem, TrainOutcome,
};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use crate::numstream::{NumMode, Vocabulary};

/// Scalar type of a model: `f64` for gradient checks, `f32` for training.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}

#[derive(Debug, thiserror::Error)]
pub enum ToynetError {
    #[error("sequence of {len} positions exceeds the context length {context}")]
    ContextOverflow { len: usize, context: usize },
    #[error("example {example}: {msg}")]
    SlotMismatch { example: usize, msg: String },
    #[error("loss became non-finite at step {step}")]
    DivergenceDetected { step: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("malformed generation: {0}")]
    MalformedGeneration(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderConfig {
    /// Two-layer perceptron over the flattened single-channel raster.
    RasterMlp { pixels: usize, hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub embed_dim: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    /// Maximum positions, counting the image token.
    pub context_len: usize,
    pub mode: NumMode,
    pub numeric_head_hidden: usize,
    pub vocab_size: usize,
    pub precision: Precision,
}

impl ModelConfig {
    pub fn new(mode: NumMode, vocab_size: usize, pixels: usize) -> Self {
        Self {
            encoder: EncoderConfig::RasterMlp { pixels, hidden: 256 },
            embed_dim: 128,
            decoder_layers: 2,
            heads: 4,
            mlp_ratio: 4,
            context_len: 64,
            mode,
            numeric_head_hidden: 128,
            vocab_size,
            precision: Precision::Single,
        }
    }

    pub fn validate(&self) -> Result<(), ToynetError> {
        let EncoderConfig::RasterMlp { pixels, hidden } = self.encoder;
        let ok = self.embed_dim > 0
            && self.heads > 0
            && self.embed_dim % self.heads == 0
            && self.decoder_layers > 0
            && self.mlp_ratio > 0
            && self.context_len >= 3
            && self.numeric_head_hidden > 0
            && self.vocab_size > 0
            && pixels > 0
            && hidden > 0;
        if ok {
            Ok(())
        } else {
            Err(ToynetError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn pixels(&self) -> usize {
        let EncoderConfig::RasterMlp { pixels, .. } = self.encoder;
        pixels
    }

    pub fn enc_hidden(&self) -> usize {
        let EncoderConfig::RasterMlp { hidden, .. } = self.encoder;
        hidden
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.embed_dim * self.mlp_ratio
    }
}

/// Location of one parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tx {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Tx {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.off..self.off + self.len()
    }

    #[inline]
    pub fn of<'a, T>(&self, v: &'a [T]) -> &'a [T] {
        &v[self.range()]
    }

    #[inline]
    pub fn of_mut<'a, T>(&self, v: &'a mut [T]) -> &'a mut [T] {
        &mut v[self.range()]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlockIx {
    pub norm1: Tx,
    pub wq: Tx,
    pub bq: Tx,
    /// Keys carry no bias: softmax ignores a per-query constant shift.
    pub wk: Tx,
    pub wv: Tx,
    pub bv: Tx,
    pub wo: Tx,
    pub bo: Tx,
    pub norm2: Tx,
    pub w1: Tx,
    pub b1: Tx,
    pub w2: Tx,
    pub b2: Tx,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub enc_w1: Tx,
    pub enc_b1: Tx,
    pub enc_w2: Tx,
    pub enc_b2: Tx,
    pub tok: Tx,
    pub pos: Tx,
    pub blocks: Vec<BlockIx>,
    pub norm_f: Tx,
    pub head_w: Tx,
    pub head_b: Tx,
    pub num_w1: Tx,
    pub num_b1: Tx,
    pub num_w2: Tx,
    pub num_b2: Tx,
    /// Every tensor with its name, in storage order.
    pub tensors: Vec<(String, Tx)>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut tensors: Vec<(String, Tx)> = Vec::new();
        let mut off = 0;
        let mut add = |name: String, rows: usize, cols: usize| {
            let t = Tx { off, rows, cols };
            off += rows * cols;
            tensors.push((name, t));
            t
        };
        let (d, f, he) = (cfg.embed_dim, cfg.ffn_dim(), cfg.enc_hidden());
        let enc_w1 = add("enc.w1".into(), cfg.pixels(), he);
        let enc_b1 = add("enc.b1".into(), 1, he);
        let enc_w2 = add("enc.w2".into(), he, d);
        let enc_b2 = add("enc.b2".into(), 1, d);
        let tok = add("tok_emb".into(), cfg.vocab_size, d);
        let pos = add("pos_emb".into(), cfg.context_len, d);
        let blocks = (0..cfg.decoder_layers)
            .map(|l| BlockIx {
                norm1: add(format!("block{l}.norm1"), 1, d),
                wq: add(format!("block{l}.wq"), d, d),
                bq: add(format!("block{l}.bq"), 1, d),
                wk: add(format!("block{l}.wk"), d, d),
                wv: add(format!("block{l}.wv"), d, d),
                bv: add(format!("block{l}.bv"), 1, d),
                wo: add(format!("block{l}.wo"), d, d),
                bo: add(format!("block{l}.bo"), 1, d),
                norm2: add(format!("block{l}.norm2"), 1, d),
                w1: add(format!("block{l}.w1"), d, f),
                b1: add(format!("block{l}.b1"), 1, f),
                w2: add(format!("block{l}.w2"), f, d),
                b2: add(format!("block{l}.b2"), 1, d),
            })
            .collect();
        let norm_f = add("norm_f".into(), 1, d);
        let head_w = add("head.w".into(), d, cfg.vocab_size);
        let head_b = add("head.b".into(), 1, cfg.vocab_size);
        let num_w1 = add("num.w1".into(), d, cfg.numeric_head_hidden);
        let num_b1 = add("num.b1".into(), 1, cfg.numeric_head_hidden);
        let num_w2 = add("num.w2".into(), cfg.numeric_head_hidden, 1);
        let num_b2 = add("num.b2".into(), 1, 1);
        Self {
            enc_w1,
            enc_b1,
            enc_w2,
            enc_b2,
            tok,
            pos,
            blocks,
            norm_f,
            head_w,
            head_b,
            num_w1,
            num_b1,
            num_w2,
            num_b2,
            tensors,
            total: off,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<Tx> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| *t)
    }
}

/// Parameters plus everything needed to interpret them.
#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Vec<T>,
    pub vocab: Vocabulary,
    pub stats: SlotStats,
}

impl<T: Real> Model<T> {
    /// Random initialization from `seed`.
    pub fn init(config: ModelConfig, vocab: Vocabulary, stats: SlotStats, seed: u64) -> Result<Self, ToynetError> {
        config.validate()?;
        if vocab.len() != config.vocab_size {
            return Err(ToynetError::InvalidConfig(format!(
                "vocab has {} tokens, config says {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let layout = Layout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let resid = 1.0 / (2.0 * config.decoder_layers as f64).sqrt();
        for (name, t) in &layout.tensors {
            let leaf = name.rsplit('.').next().unwrap_or(name);
            let std = match leaf {
                _ if name.starts_with("block") && leaf.starts_with("norm") => None,
                "norm_f" => None,
                // pixels rarely lit in training should start near zero
                "w1" if name == "enc.w1" => Some(0.01),
                "tok_emb" | "pos_emb" => Some(0.1),
                "wo" | "w2" if name.starts_with("block") => Some(resid / (t.rows as f64).sqrt()),
                w if w.starts_with('w') => Some(1.0 / (t.rows as f64).sqrt()),
                _ => Some(0.0),
            };
            let slot = t.of_mut(&mut params);
            match std {
                None => slot.fill(T::one()),
                Some(s) if s == 0.0 => {}
                Some(s) => {
                    for v in slot.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = c(z * s);
                    }
                }
            }
        }
        Ok(Self {
            config,
            layout,
            params,
            vocab,
            stats,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| c(v.to_f64().unwrap_or(f64::NAN))).collect(),
            vocab: self.vocab.clone(),
            stats: self.stats.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numstream::build_vocabulary;
    use crate::scene::AttributeCatalog;

    pub(crate) fn tiny_config(mode: NumMode, vocab: usize) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig::RasterMlp { pixels: 16, hidden: 6 },
            embed_dim: 8,
            decoder_layers: 2,
            heads: 2,
            mlp_ratio: 2,
            context_len: 40,
            mode,
            numeric_head_hidden: 5,
            vocab_size: vocab,
            precision: Precision::Double,
        }
    }

    #[test]
    fn layout_is_dense() {
        let v = build_vocabulary(AttributeCatalog::clevr(), NumMode::Float);
        let cfg = tiny_config(NumMode::Float, v.len());
        let l = Layout::new(&cfg);
        let mut next = 0;
        for (_, t) in &l.tensors {
            assert_eq!(t.off, next);
            next += t.len();
        }
        assert_eq!(next, l.total);
        assert_eq!(l.tensor("num.w2").unwrap().len(), 5);
    }

    #[test]
    fn default_model_is_under_a_million_parameters() {
        let v = build_vocabulary(AttributeCatalog::clevr(), NumMode::Char);
        let cfg = ModelConfig::new(NumMode::Char, v.len(), 64 * 64);
        let layout = Layout::new(&cfg);
        let decoder: usize = layout
            .tensors
            .iter()
            .filter(|(n, _)| !n.starts_with("enc."))
            .map(|(_, t)| t.len())
            .sum();
        assert!(decoder < 1_000_000, "{decoder}");
    }

    #[test]
    fn init_is_seeded() {
        let v = build_vocabulary(AttributeCatalog::clevr(), NumMode::Float);
        let cfg = tiny_config(NumMode::Float, v.len());
        let a = Model::<f64>::init(cfg.clone(), v.clone(), SlotStats::default(), 3).unwrap();
        let b = Model::<f64>::init(cfg.clone(), v.clone(), SlotStats::default(), 3).unwrap();
        let c = Model::<f64>::init(cfg, v, SlotStats::default(), 4).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
        assert!(a.is_finite());
    }
}

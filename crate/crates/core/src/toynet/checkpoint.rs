use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::{Layout, Model, ModelConfig, SlotStats, ToynetError, TrainOutcome};
use crate::numstream::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DRNDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    offset: usize,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
    stats: SlotStats,
    step: usize,
    tensors: Vec<TensorEntry>,
    param_count: usize,
    has_optimizer: bool,
}

/// Parameters plus optional Adam moments.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub step: usize,
    pub adam: Option<(Vec<f32>, Vec<f32>)>,
}

impl From<TrainOutcome> for Checkpoint {
    fn from(o: TrainOutcome) -> Self {
        Self {
            model: o.model,
            step: o.steps_done,
            adam: Some((o.adam_m, o.adam_v)),
        }
    }
}

fn put(out: &mut Vec<u8>, xs: &[f32]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn checkpoint_bytes(ck: &Checkpoint) -> Result<Vec<u8>, ToynetError> {
    let m = &ck.model;
    let header = Header {
        config: m.config.clone(),
        vocab: m.vocab.clone(),
        stats: m.stats.clone(),
        step: ck.step,
        tensors: m
            .layout
            .tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                offset: t.off,
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
        param_count: m.params.len(),
        has_optimizer: ck.adam.is_some(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| ToynetError::Checkpoint(e.to_string()))?;
    let n = m.params.len();
    let mut out = Vec::with_capacity(24 + json.len() + 12 * n);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    put(&mut out, &m.params);
    if let Some((am, av)) = &ck.adam {
        if am.len() != n || av.len() != n {
            return Err(ToynetError::Checkpoint("optimizer state size mismatch".into()));
        }
        put(&mut out, am);
        put(&mut out, av);
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ToynetError> {
    let bytes = checkpoint_bytes(ck)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], ToynetError> {
    if buf.len() < n {
        return Err(ToynetError::Checkpoint("truncated".into()));
    }
    let (a, b) = buf.split_at(n);
    *buf = b;
    Ok(a)
}

fn floats(buf: &mut &[u8], n: usize) -> Result<Vec<f32>, ToynetError> {
    let raw = take(buf, n * 4)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint, ToynetError> {
    let mut buf = bytes;
    if take(&mut buf, 8)? != CHECKPOINT_MAGIC {
        return Err(ToynetError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut buf, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ToynetError::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(take(&mut buf, 8)?.try_into().unwrap()) as usize;
    let header: Header =
        serde_json::from_slice(take(&mut buf, hlen)?).map_err(|e| ToynetError::Checkpoint(e.to_string()))?;
    header.config.validate()?;
    let layout = Layout::new(&header.config);
    let same_layout = layout.total == header.param_count
        && layout.tensors.len() == header.tensors.len()
        && layout
            .tensors
            .iter()
            .zip(&header.tensors)
            .all(|((name, t), e)| *name == e.name && t.off == e.offset && t.rows == e.rows && t.cols == e.cols);
    if !same_layout {
        return Err(ToynetError::Checkpoint("tensor layout does not match the config".into()));
    }
    if header.vocab.len() != header.config.vocab_size {
        return Err(ToynetError::Checkpoint("vocabulary size does not match the config".into()));
    }
    let n = header.param_count;
    let params = floats(&mut buf, n)?;
    let adam = if header.has_optimizer {
        Some((floats(&mut buf, n)?, floats(&mut buf, n)?))
    } else {
        None
    };
    if !buf.is_empty() {
        return Err(ToynetError::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        model: Model {
            config: header.config,
            layout,
            params,
            vocab: header.vocab,
            stats: header.stats,
        },
        step: header.step,
        adam,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ToynetError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numstream::NumMode;
    use crate::toynet::model::tests::tiny_model;

    fn sample() -> Checkpoint {
        let m: Model<f32> = tiny_model(NumMode::Float, 3).cast();
        let n = m.params.len();
        Checkpoint {
            model: m,
            step: 42,
            adam: Some(((0..n).map(|i| i as f32 * 0.5).collect(), vec![0.25; n])),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_checkpoint(&p, &ck).unwrap();
        let back = load_checkpoint(&p).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.model.params, ck.model.params);
        assert_eq!(back.adam, ck.adam);
        assert_eq!(back.model.config, ck.model.config);
        assert_eq!(back.model.stats, ck.model.stats);
        assert_eq!(checkpoint_bytes(&back).unwrap(), checkpoint_bytes(&ck).unwrap());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = checkpoint_bytes(&sample()).unwrap();
        assert!(checkpoint_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(checkpoint_from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(checkpoint_from_bytes(&extra).is_err());
    }
}

use super::linalg::{axpy, dot, gelu, matmul, rmsnorm, softmax_in_place};
use super::model::{encode_image, numeric_head, token_logits};
use super::{c, Model, Real, ToynetError};
use crate::dsl::{self, ParseOptions, ProgramText};
use crate::numstream::{self, NumMode};
use crate::scene::{AttributeCatalog, SceneProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Emitted content tokens, without `[BOS]` or `[EOS]`.
    pub ids: Vec<u32>,
    /// De-standardized numeric-head outputs, one per emitted `[NUM]`.
    pub numbers: Vec<f64>,
    pub text: ProgramText,
    /// False when the context filled up before `[EOS]`.
    pub finished: bool,
}

impl Generation {
    /// Parses the text; any failure is reported as a malformed generation.
    pub fn scene(&self, catalog: &AttributeCatalog, opts: &ParseOptions) -> Result<SceneProgram, ToynetError> {
        if !self.finished {
            return Err(ToynetError::MalformedGeneration("no [EOS] before the context limit".into()));
        }
        dsl::parse_program_with(&self.text, catalog, opts)
            .map_err(|e| ToynetError::MalformedGeneration(e.to_string()))
    }
}

/// Decoder state for one sequence: keys and values of every processed position.
struct Incremental<'m, T: Real> {
    m: &'m Model<T>,
    keys: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    t: usize,
}

impl<'m, T: Real> Incremental<'m, T> {
    fn new(m: &'m Model<T>) -> Self {
        let n = m.layout.blocks.len();
        Self {
            m,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
            t: 0,
        }
    }

    /// Feeds one input row; returns the final normalized hidden state.
    /// Mirrors the row operations of the full forward pass exactly.
    fn step(&mut self, x_in: Vec<T>) -> Vec<T> {
        let m = self.m;
        let cfg = &m.config;
        let prm = &m.params;
        let (d, f, heads) = (cfg.embed_dim, cfg.ffn_dim(), cfg.heads);
        let dh = d / heads;
        let scale = T::one() / c::<T>(dh as f64).sqrt();
        let t = self.t;
        let mut x = x_in;
        for (li, b) in m.layout.blocks.iter().enumerate() {
            let mut xn1 = vec![T::zero(); d];
            rmsnorm(&x, b.norm1.of(prm), &mut xn1, 1, d);
            let mut q = vec![T::zero(); d];
            let mut k = vec![T::zero(); d];
            let mut v = vec![T::zero(); d];
            matmul(&xn1, b.wq.of(prm), Some(b.bq.of(prm)), &mut q, 1, d, d);
            matmul(&xn1, b.wk.of(prm), None, &mut k, 1, d, d);
            matmul(&xn1, b.wv.of(prm), Some(b.bv.of(prm)), &mut v, 1, d, d);
            self.keys[li].extend_from_slice(&k);
            self.values[li].extend_from_slice(&v);
            let (keys, values) = (&self.keys[li], &self.values[li]);
            let mut ctx = vec![T::zero(); d];
            let mut row = vec![T::zero(); t + 1];
            for h in 0..heads {
                let o = h * dh;
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(&q[o..o + dh], &keys[j * d + o..j * d + o + dh]) * scale;
                }
                softmax_in_place(&mut row);
                for (j, &w) in row.iter().enumerate() {
                    axpy(&mut ctx[o..o + dh], w, &values[j * d + o..j * d + o + dh]);
                }
            }
            let mut x2 = vec![T::zero(); d];
            matmul(&ctx, b.wo.of(prm), Some(b.bo.of(prm)), &mut x2, 1, d, d);
            for (o, xv) in x2.iter_mut().zip(&x) {
                *o += *xv;
            }
            let mut xn2 = vec![T::zero(); d];
            rmsnorm(&x2, b.norm2.of(prm), &mut xn2, 1, d);
            let mut f1 = vec![T::zero(); f];
            matmul(&xn2, b.w1.of(prm), Some(b.b1.of(prm)), &mut f1, 1, d, f);
            let g1: Vec<T> = f1.iter().map(|&z| gelu(z)).collect();
            let mut x3 = vec![T::zero(); d];
            matmul(&g1, b.w2.of(prm), Some(b.b2.of(prm)), &mut x3, 1, f, d);
            for (o, xv) in x3.iter_mut().zip(&x2) {
                *o += *xv;
            }
            x = x3;
        }
        self.t += 1;
        let mut h = vec![T::zero(); d];
        rmsnorm(&x, m.layout.norm_f.of(prm), &mut h, 1, d);
        h
    }

    fn token_row(&self, id: u32, position: usize) -> Vec<T> {
        let (d, prm) = (self.m.config.embed_dim, &self.m.params);
        let tok = self.m.layout.tok.of(prm);
        let pos = self.m.layout.pos.of(prm);
        let id = id as usize;
        (0..d).map(|j| tok[id * d + j] + pos[position * d + j]).collect()
    }
}

fn argmax<T: Real>(row: &[T]) -> u32 {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Greedy decoding until `[EOS]` or the context limit.
pub fn greedy_generate<T: Real>(m: &Model<T>, pixels: &[(u32, T)]) -> Result<Generation, ToynetError> {
    let cfg = &m.config;
    let (d, vsz) = (cfg.embed_dim, cfg.vocab_size);
    let vocab = &m.vocab;
    let mut dec = Incremental::new(m);
    let (_, _, e) = encode_image(m, pixels);
    let pos = m.layout.pos.of(&m.params);
    dec.step((0..d).map(|j| e[j] + pos[j]).collect());
    let mut h = dec.step(dec.token_row(vocab.bos(), 1));
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    let mut logits = vec![T::zero(); vsz];
    let mut finished = false;
    loop {
        token_logits(m, &h, &mut logits);
        let next = argmax(&logits);
        if next == vocab.eos() {
            finished = true;
            break;
        }
        if cfg.mode == NumMode::Float && Some(next) == vocab.num() {
            raw.push(numeric_head(m, &h).0.to_f64().unwrap_or(f64::NAN));
        }
        ids.push(next);
        // position of the token just emitted
        let position = ids.len() + 1;
        if position >= cfg.context_len {
            break;
        }
        h = dec.step(dec.token_row(next, position));
    }
    let families = numstream::slot_families(&ids, vocab);
    let numbers: Vec<f64> = raw
        .iter()
        .zip(&families)
        .map(|(&y, fam)| m.stats.destandardize(fam, y))
        .collect();
    let text = match numstream::decode_two_pass(&ids, &numbers, vocab) {
        Ok(t) => t,
        Err(_) => {
            finished = false;
            ProgramText::from("")
        }
    };
    Ok(Generation {
        ids,
        numbers,
        text,
        finished,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toynet::model::forward;
    use crate::toynet::model::tests::tiny_model;

    #[test]
    fn incremental_rows_match_full_forward() {
        for mode in [NumMode::Float, NumMode::Char] {
            let m = tiny_model(mode, 11);
            let pixels = vec![(2u32, 0.75), (9, 1.0)];
            let prefix = [m.vocab.bos(), 7, 12, 3, 19];
            let full = forward(&m, &pixels, &prefix).unwrap();
            let mut dec = Incremental::new(&m);
            let (_, _, e) = encode_image(&m, &pixels);
            let d = m.config.embed_dim;
            let pos = m.layout.pos.of(&m.params);
            dec.step((0..d).map(|j| e[j] + pos[j]).collect());
            for (i, &id) in prefix.iter().enumerate() {
                let h = dec.step(dec.token_row(id, i + 1));
                let mut row = vec![0.0; m.config.vocab_size];
                token_logits(&m, &h, &mut row);
                assert_eq!(row.as_slice(), full.row(i));
                assert_eq!(numeric_head(&m, &h).0, full.numeric[i]);
            }
        }
    }

    #[test]
    fn untrained_model_generation_is_handled() {
        let m = tiny_model(NumMode::Float, 12);
        let g = greedy_generate(&m, &[(1, 1.0)]).unwrap();
        let again = greedy_generate(&m, &[(1, 1.0)]).unwrap();
        assert_eq!(g, again);
        let scene = g.scene(AttributeCatalog::clevr(), &ParseOptions::default());
        assert!(matches!(scene, Err(ToynetError::MalformedGeneration(_))));
    }
}

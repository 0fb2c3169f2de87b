use super::linalg::{
    a_bt, acc_at_b, acc_colsum, axpy, dot, gelu, gelu_grad, matmul, rmsnorm, rmsnorm_backward,
    softmax_in_place,
};
use super::{c, Model, Real, ToynetError};
use crate::exec::{self, Parallelism};
use crate::numstream::NumMode;

/// One training sequence with its image.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    /// Nonzero pixels of the single-channel raster, as (index, value).
    pub pixels: Vec<(u32, T)>,
    /// `[BOS]` followed by the content tokens.
    pub input: Vec<u32>,
    /// The content tokens followed by `[EOS]`.
    pub targets: Vec<u32>,
    /// (target index, standardized value) for every `[NUM]` target.
    pub slots: Vec<(usize, T)>,
}

impl<T: Real> Example<T> {
    pub fn positions(&self) -> usize {
        self.input.len() + 1
    }
}

/// Per-position outputs for the token positions of a prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// `prefix_len × vocab_size`, row-major.
    pub logits: Vec<T>,
    /// Numeric head output per position, in standardized units.
    pub numeric: Vec<T>,
    pub prefix_len: usize,
    pub vocab_size: usize,
}

impl<T: Real> ForwardOutput<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.logits[i * self.vocab_size..(i + 1) * self.vocab_size]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub ce: f64,
    pub mse: f64,
    pub tokens: usize,
    pub slots: usize,
}

pub(crate) struct BlockCache<T> {
    x: Vec<T>,
    inv1: Vec<T>,
    xn1: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// heads × t × t attention weights
    p: Vec<T>,
    ctx: Vec<T>,
    x2: Vec<T>,
    inv2: Vec<T>,
    xn2: Vec<T>,
    f1: Vec<T>,
    g1: Vec<T>,
}

pub(crate) struct Cache<T> {
    enc_pre: Vec<T>,
    enc_h: Vec<T>,
    blocks: Vec<BlockCache<T>>,
    xf: Vec<T>,
    invf: Vec<T>,
    /// Final normalized hidden states, `t × d`.
    pub hf: Vec<T>,
    pub t: usize,
}

/// Image-token embedding from sparse pixels: GELU MLP, pre-activations returned too.
pub(crate) fn encode_image<T: Real>(m: &Model<T>, pixels: &[(u32, T)]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let l = &m.layout;
    let he = m.config.enc_hidden();
    let d = m.config.embed_dim;
    let w1 = l.enc_w1.of(&m.params);
    let mut pre = l.enc_b1.of(&m.params).to_vec();
    for &(p, v) in pixels {
        let p = p as usize;
        axpy(&mut pre, v, &w1[p * he..(p + 1) * he]);
    }
    let h: Vec<T> = pre.iter().map(|&z| gelu(z)).collect();
    let mut e = vec![T::zero(); d];
    matmul(&h, l.enc_w2.of(&m.params), Some(l.enc_b2.of(&m.params)), &mut e, 1, he, d);
    (pre, h, e)
}

/// Causal attention for rows `0..t` given full q, k, v (t × d). Returns ctx and weights.
fn attention<T: Real>(q: &[T], k: &[T], v: &[T], t: usize, d: usize, heads: usize) -> (Vec<T>, Vec<T>) {
    let dh = d / heads;
    let scale = T::one() / c::<T>(dh as f64).sqrt();
    let mut ctx = vec![T::zero(); t * d];
    let mut p = vec![T::zero(); heads * t * t];
    for h in 0..heads {
        let o = h * dh;
        for i in 0..t {
            let row = &mut p[(h * t + i) * t..(h * t + i) * t + i + 1];
            let qi = &q[i * d + o..i * d + o + dh];
            for (j, s) in row.iter_mut().enumerate() {
                *s = dot(qi, &k[j * d + o..j * d + o + dh]) * scale;
            }
            softmax_in_place(row);
            let out = &mut ctx[i * d + o..i * d + o + dh];
            for (j, &w) in row.iter().enumerate() {
                axpy(out, w, &v[j * d + o..j * d + o + dh]);
            }
        }
    }
    (ctx, p)
}

/// Full forward over `[image] + input`, keeping what backward needs.
pub(crate) fn run<T: Real>(m: &Model<T>, pixels: &[(u32, T)], input: &[u32]) -> Result<Cache<T>, ToynetError> {
    let cfg = &m.config;
    let l = &m.layout;
    let prm = &m.params;
    let (d, f, heads) = (cfg.embed_dim, cfg.ffn_dim(), cfg.heads);
    let t = input.len() + 1;
    if t > cfg.context_len {
        return Err(ToynetError::ContextOverflow {
            len: t,
            context: cfg.context_len,
        });
    }
    if let Some(&bad) = input.iter().find(|&&id| id as usize >= cfg.vocab_size) {
        return Err(ToynetError::InvalidConfig(format!("token id {bad} outside vocabulary")));
    }
    let (enc_pre, enc_h, e) = encode_image(m, pixels);
    let pos = l.pos.of(prm);
    let tok = l.tok.of(prm);
    let mut x = vec![T::zero(); t * d];
    for (j, xv) in x[..d].iter_mut().enumerate() {
        *xv = e[j] + pos[j];
    }
    for (i, &id) in input.iter().enumerate() {
        let row = &mut x[(i + 1) * d..(i + 2) * d];
        let id = id as usize;
        for j in 0..d {
            row[j] = tok[id * d + j] + pos[(i + 1) * d + j];
        }
    }
    let mut blocks = Vec::with_capacity(l.blocks.len());
    for b in &l.blocks {
        let mut xn1 = vec![T::zero(); t * d];
        let inv1 = rmsnorm(&x, b.norm1.of(prm), &mut xn1, t, d);
        let mut q = vec![T::zero(); t * d];
        let mut k = vec![T::zero(); t * d];
        let mut v = vec![T::zero(); t * d];
        matmul(&xn1, b.wq.of(prm), Some(b.bq.of(prm)), &mut q, t, d, d);
        matmul(&xn1, b.wk.of(prm), None, &mut k, t, d, d);
        matmul(&xn1, b.wv.of(prm), Some(b.bv.of(prm)), &mut v, t, d, d);
        let (ctx, p) = attention(&q, &k, &v, t, d, heads);
        let mut x2 = vec![T::zero(); t * d];
        matmul(&ctx, b.wo.of(prm), Some(b.bo.of(prm)), &mut x2, t, d, d);
        for (o, xv) in x2.iter_mut().zip(&x) {
            *o += *xv;
        }
        let mut xn2 = vec![T::zero(); t * d];
        let inv2 = rmsnorm(&x2, b.norm2.of(prm), &mut xn2, t, d);
        let mut f1 = vec![T::zero(); t * f];
        matmul(&xn2, b.w1.of(prm), Some(b.b1.of(prm)), &mut f1, t, d, f);
        let g1: Vec<T> = f1.iter().map(|&z| gelu(z)).collect();
        let mut x3 = vec![T::zero(); t * d];
        matmul(&g1, b.w2.of(prm), Some(b.b2.of(prm)), &mut x3, t, f, d);
        for (o, xv) in x3.iter_mut().zip(&x2) {
            *o += *xv;
        }
        blocks.push(BlockCache {
            x: std::mem::replace(&mut x, x3),
            inv1,
            xn1,
            q,
            k,
            v,
            p,
            ctx,
            x2,
            inv2,
            xn2,
            f1,
            g1,
        });
    }
    let mut hf = vec![T::zero(); t * d];
    let invf = rmsnorm(&x, l.norm_f.of(prm), &mut hf, t, d);
    Ok(Cache {
        enc_pre,
        enc_h,
        blocks,
        xf: x,
        invf,
        hf,
        t,
    })
}

/// Token logits for one normalized hidden row.
pub(crate) fn token_logits<T: Real>(m: &Model<T>, h: &[T], out: &mut [T]) {
    let l = &m.layout;
    matmul(h, l.head_w.of(&m.params), Some(l.head_b.of(&m.params)), out, 1, m.config.embed_dim, m.config.vocab_size);
}

/// Numeric head for one normalized hidden row: tanh → linear → GELU → linear.
/// Returns (output, tanh activations, hidden pre-activations).
pub(crate) fn numeric_head<T: Real>(m: &Model<T>, h: &[T]) -> (T, Vec<T>, Vec<T>) {
    let l = &m.layout;
    let (d, hn) = (m.config.embed_dim, m.config.numeric_head_hidden);
    let a: Vec<T> = h.iter().map(|v| v.tanh()).collect();
    let mut z = vec![T::zero(); hn];
    matmul(&a, l.num_w1.of(&m.params), Some(l.num_b1.of(&m.params)), &mut z, 1, d, hn);
    let g: Vec<T> = z.iter().map(|&v| gelu(v)).collect();
    let y = dot(&g, l.num_w2.of(&m.params)) + l.num_b2.of(&m.params)[0];
    (y, a, z)
}

/// Logits and numeric outputs at every token position of `prefix`
/// (which normally starts with `[BOS]`).
pub fn forward<T: Real>(m: &Model<T>, pixels: &[(u32, T)], prefix: &[u32]) -> Result<ForwardOutput<T>, ToynetError> {
    let cache = run(m, pixels, prefix)?;
    let (d, vsz) = (m.config.embed_dim, m.config.vocab_size);
    let n = prefix.len();
    let mut logits = vec![T::zero(); n * vsz];
    let mut numeric = vec![T::zero(); n];
    for i in 0..n {
        let h = &cache.hf[(i + 1) * d..(i + 2) * d];
        token_logits(m, h, &mut logits[i * vsz..(i + 1) * vsz]);
        numeric[i] = numeric_head(m, h).0;
    }
    Ok(ForwardOutput {
        logits,
        numeric,
        prefix_len: n,
        vocab_size: vsz,
    })
}

pub(crate) fn check_example<T: Real>(m: &Model<T>, ex: &Example<T>, idx: usize) -> Result<(), ToynetError> {
    let err = |msg: String| ToynetError::SlotMismatch { example: idx, msg };
    if ex.input.len() != ex.targets.len() {
        return Err(err("input and target lengths differ".into()));
    }
    let num = m.vocab.num();
    let expected: Vec<usize> = ex
        .targets
        .iter()
        .enumerate()
        .filter(|(_, &t)| Some(t) == num)
        .map(|(i, _)| i)
        .collect();
    let got: Vec<usize> = ex.slots.iter().map(|s| s.0).collect();
    match m.config.mode {
        NumMode::Float if expected != got => Err(err(format!("[NUM] targets at {expected:?}, slots at {got:?}"))),
        NumMode::Char if !ex.slots.is_empty() => Err(err("char-mode example carries numeric slots".into())),
        _ => Ok(()),
    }
}

/// Unnormalized loss sums for one example, with gradients scaled by
/// `ce_scale` / `mse_scale` accumulated into `grad` when given.
pub(crate) fn example_loss<T: Real>(
    m: &Model<T>,
    ex: &Example<T>,
    ce_scale: T,
    mse_scale: T,
    grad: Option<&mut [T]>,
) -> Result<(f64, f64), ToynetError> {
    let cache = run(m, &ex.pixels, &ex.input)?;
    let cfg = &m.config;
    let l = &m.layout;
    let prm = &m.params;
    let (d, vsz, t) = (cfg.embed_dim, cfg.vocab_size, cache.t);
    let n = ex.targets.len();
    let mut ce = 0.0;
    let mut sq = 0.0;
    let mut dlogits = grad.is_some().then(|| vec![T::zero(); n * vsz]);
    let mut row = vec![T::zero(); vsz];
    for (i, &target) in ex.targets.iter().enumerate() {
        let h = &cache.hf[(i + 1) * d..(i + 2) * d];
        token_logits(m, h, &mut row);
        let lse = softmax_in_place(&mut row);
        let logit_t = lse + row[target as usize].ln();
        ce += (lse - logit_t).to_f64().unwrap_or(f64::NAN);
        if let Some(dl) = dlogits.as_mut() {
            let dr = &mut dl[i * vsz..(i + 1) * vsz];
            for (o, p) in dr.iter_mut().zip(&row) {
                *o = *p * ce_scale;
            }
            dr[target as usize] -= ce_scale;
        }
    }
    let mut slot_terms = Vec::new();
    if cfg.mode == NumMode::Float {
        for &(i, target) in &ex.slots {
            let h = &cache.hf[(i + 1) * d..(i + 2) * d];
            let (y, a, z) = numeric_head(m, h);
            let e = y - target;
            sq += (e * e).to_f64().unwrap_or(f64::NAN);
            slot_terms.push((i, e, a, z));
        }
    }
    let Some(grad) = grad else {
        return Ok((ce, sq));
    };
    let dlogits = dlogits.expect("allocated with grad");

    // heads → dhf (rows 1..t)
    let mut dhf = vec![T::zero(); t * d];
    let hrows = &cache.hf[d..];
    acc_at_b(hrows, &dlogits, l.head_w.of_mut(grad), n, d, vsz);
    acc_colsum(&dlogits, l.head_b.of_mut(grad), n, vsz);
    a_bt(&dlogits, l.head_w.of(prm), &mut dhf[d..], n, vsz, d, true);
    let hn = cfg.numeric_head_hidden;
    let two = c::<T>(2.0);
    for (i, e, a, z) in slot_terms {
        let dy = two * e * mse_scale;
        let g: Vec<T> = z.iter().map(|&v| gelu(v)).collect();
        axpy(l.num_w2.of_mut(grad), dy, &g);
        l.num_b2.of_mut(grad)[0] += dy;
        let w2 = l.num_w2.of(prm);
        let dz: Vec<T> = (0..hn).map(|j| dy * w2[j] * gelu_grad(z[j])).collect();
        acc_at_b(&a, &dz, l.num_w1.of_mut(grad), 1, d, hn);
        axpy(l.num_b1.of_mut(grad), T::one(), &dz);
        let mut da = vec![T::zero(); d];
        a_bt(&dz, l.num_w1.of(prm), &mut da, 1, hn, d, false);
        for (j, o) in dhf[(i + 1) * d..(i + 2) * d].iter_mut().enumerate() {
            *o += da[j] * (T::one() - a[j] * a[j]);
        }
    }

    // final norm
    let mut dx = vec![T::zero(); t * d];
    rmsnorm_backward(&cache.xf, &cache.invf, l.norm_f.of(prm), &dhf, &mut dx, l.norm_f.of_mut(grad), t, d);

    // blocks in reverse
    let (f, heads) = (cfg.ffn_dim(), cfg.heads);
    let dh = d / heads;
    let scale = T::one() / c::<T>(dh as f64).sqrt();
    for (b, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
        // MLP: x3 = x2 + W2 gelu(W1 xn2)
        acc_at_b(&bc.g1, &dx, b.w2.of_mut(grad), t, f, d);
        acc_colsum(&dx, b.b2.of_mut(grad), t, d);
        let mut df1 = vec![T::zero(); t * f];
        a_bt(&dx, b.w2.of(prm), &mut df1, t, d, f, false);
        for (o, &z) in df1.iter_mut().zip(&bc.f1) {
            *o *= gelu_grad(z);
        }
        acc_at_b(&bc.xn2, &df1, b.w1.of_mut(grad), t, d, f);
        acc_colsum(&df1, b.b1.of_mut(grad), t, f);
        let mut dxn2 = vec![T::zero(); t * d];
        a_bt(&df1, b.w1.of(prm), &mut dxn2, t, f, d, false);
        let mut dx2 = dx;
        rmsnorm_backward(&bc.x2, &bc.inv2, b.norm2.of(prm), &dxn2, &mut dx2, b.norm2.of_mut(grad), t, d);

        // attention: x2 = x + Wo ctx
        acc_at_b(&bc.ctx, &dx2, b.wo.of_mut(grad), t, d, d);
        acc_colsum(&dx2, b.bo.of_mut(grad), t, d);
        let mut dctx = vec![T::zero(); t * d];
        a_bt(&dx2, b.wo.of(prm), &mut dctx, t, d, d, false);
        let mut dq = vec![T::zero(); t * d];
        let mut dk = vec![T::zero(); t * d];
        let mut dv = vec![T::zero(); t * d];
        let mut dp = vec![T::zero(); t];
        for h in 0..heads {
            let o = h * dh;
            for i in 0..t {
                let prow = &bc.p[(h * t + i) * t..(h * t + i) * t + i + 1];
                let dci = &dctx[i * d + o..i * d + o + dh];
                let mut s = T::zero();
                for (j, &pj) in prow.iter().enumerate() {
                    dp[j] = dot(dci, &bc.v[j * d + o..j * d + o + dh]);
                    s += dp[j] * pj;
                    axpy(&mut dv[j * d + o..j * d + o + dh], pj, dci);
                }
                for (j, &pj) in prow.iter().enumerate() {
                    let ds = pj * (dp[j] - s) * scale;
                    if ds != T::zero() {
                        axpy(&mut dq[i * d + o..i * d + o + dh], ds, &bc.k[j * d + o..j * d + o + dh]);
                        axpy(&mut dk[j * d + o..j * d + o + dh], ds, &bc.q[i * d + o..i * d + o + dh]);
                    }
                }
            }
        }
        let mut dxn1 = vec![T::zero(); t * d];
        for (dm, w, bias) in [(&dq, b.wq, Some(b.bq)), (&dk, b.wk, None), (&dv, b.wv, Some(b.bv))] {
            acc_at_b(&bc.xn1, dm, w.of_mut(grad), t, d, d);
            if let Some(bias) = bias {
                acc_colsum(dm, bias.of_mut(grad), t, d);
            }
            a_bt(dm, w.of(prm), &mut dxn1, t, d, d, true);
        }
        let mut dxin = dx2;
        rmsnorm_backward(&bc.x, &bc.inv1, b.norm1.of(prm), &dxn1, &mut dxin, b.norm1.of_mut(grad), t, d);
        dx = dxin;
    }

    // embeddings
    let dpos = l.pos.of_mut(grad);
    for (o, v) in dpos[..t * d].iter_mut().zip(&dx) {
        *o += *v;
    }
    let dtok = l.tok.of_mut(grad);
    for (i, &id) in ex.input.iter().enumerate() {
        let id = id as usize;
        axpy(&mut dtok[id * d..(id + 1) * d], T::one(), &dx[(i + 1) * d..(i + 2) * d]);
    }

    // encoder
    let he = cfg.enc_hidden();
    let de = &dx[..d];
    acc_at_b(&cache.enc_h, de, l.enc_w2.of_mut(grad), 1, he, d);
    axpy(l.enc_b2.of_mut(grad), T::one(), de);
    let mut dhid = vec![T::zero(); he];
    a_bt(de, l.enc_w2.of(prm), &mut dhid, 1, d, he, false);
    for (o, &z) in dhid.iter_mut().zip(&cache.enc_pre) {
        *o *= gelu_grad(z);
    }
    let dw1 = l.enc_w1.of_mut(grad);
    for &(p, v) in &ex.pixels {
        let p = p as usize;
        axpy(&mut dw1[p * he..(p + 1) * he], v, &dhid);
    }
    axpy(l.enc_b1.of_mut(grad), T::one(), &dhid);
    Ok((ce, sq))
}

/// Weighted mean losses over a batch.
pub fn batch_loss<T: Real>(m: &Model<T>, batch: &[Example<T>], w_ce: f64, w_mse: f64) -> Result<LossParts, ToynetError> {
    let (tokens, slots) = counts(m, batch)?;
    let mut ce = 0.0;
    let mut sq = 0.0;
    for ex in batch {
        let (a, b) = example_loss(m, ex, T::zero(), T::zero(), None)?;
        ce += a;
        sq += b;
    }
    Ok(parts(ce, sq, tokens, slots, w_ce, w_mse))
}

fn counts<T: Real>(m: &Model<T>, batch: &[Example<T>]) -> Result<(usize, usize), ToynetError> {
    if batch.is_empty() {
        return Err(ToynetError::EmptyDataset);
    }
    for (i, ex) in batch.iter().enumerate() {
        check_example(m, ex, i)?;
    }
    let tokens = batch.iter().map(|e| e.targets.len()).sum();
    let slots = match m.config.mode {
        NumMode::Float => batch.iter().map(|e| e.slots.len()).sum(),
        NumMode::Char => 0,
    };
    Ok((tokens, slots))
}

fn parts(ce_sum: f64, sq_sum: f64, tokens: usize, slots: usize, w_ce: f64, w_mse: f64) -> LossParts {
    let ce = ce_sum / tokens.max(1) as f64;
    let mse = if slots > 0 { sq_sum / slots as f64 } else { 0.0 };
    LossParts {
        total: w_ce * ce + w_mse * mse,
        ce,
        mse,
        tokens,
        slots,
    }
}

/// Examples per gradient chunk. Chunk gradients are summed in chunk order,
/// so the result does not depend on how chunks are scheduled.
pub const GRAD_CHUNK: usize = 4;

/// Loss and gradient of the weighted batch loss.
pub fn batch_grad<T: Real>(
    m: &Model<T>,
    batch: &[Example<T>],
    w_ce: f64,
    w_mse: f64,
    par: Parallelism,
) -> Result<(LossParts, Vec<T>), ToynetError> {
    let (tokens, slots) = counts(m, batch)?;
    let ce_scale: T = c(w_ce / tokens.max(1) as f64);
    let mse_scale: T = c(if slots > 0 { w_mse / slots as f64 } else { 0.0 });
    let chunks: Vec<&[Example<T>]> = batch.chunks(GRAD_CHUNK).collect();
    let results = exec::map_slice(&chunks, par, |chunk| -> Result<(f64, f64, Vec<T>), ToynetError> {
        let mut g = vec![T::zero(); m.params.len()];
        let (mut ce, mut sq) = (0.0, 0.0);
        for ex in chunk.iter() {
            let (a, b) = example_loss(m, ex, ce_scale, mse_scale, Some(&mut g))?;
            ce += a;
            sq += b;
        }
        Ok((ce, sq, g))
    });
    let mut grad = vec![T::zero(); m.params.len()];
    let (mut ce, mut sq) = (0.0, 0.0);
    for r in results {
        let (a, b, g) = r?;
        ce += a;
        sq += b;
        for (o, v) in grad.iter_mut().zip(&g) {
            *o += *v;
        }
    }
    Ok((parts(ce, sq, tokens, slots, w_ce, w_mse), grad))
}

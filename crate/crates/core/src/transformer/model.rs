use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::attention::{head_backward, head_forward, AttentionSpec, HeadScratch};
use super::config::TransformerConfig;
use super::linalg::{gemm, linear, linear_backward, Real};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Init {
    Normal,
    Zeros,
    Ones,
}

/// One named parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub(crate) init: Init,
    /// Weight decay applies to this block.
    pub decay: bool,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Seg {
    off: usize,
    len: usize,
}

impl Seg {
    fn of<'a, T>(&self, p: &'a [T]) -> &'a [T] {
        &p[self.off..self.off + self.len]
    }

    fn of_mut<'a, T>(&self, p: &'a mut [T]) -> &'a mut [T] {
        &mut p[self.off..self.off + self.len]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LayerSegs {
    ln1_g: Seg,
    ln1_b: Seg,
    wq: Seg,
    bq: Seg,
    wk: Seg,
    bk: Seg,
    wv: Seg,
    bv: Seg,
    wo: Seg,
    bo: Seg,
    ln2_g: Seg,
    ln2_b: Seg,
    w1: Seg,
    b1: Seg,
    w2: Seg,
    b2: Seg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Segs {
    tok: Seg,
    pos: Seg,
    layers: Vec<LayerSegs>,
    lnf_g: Seg,
    lnf_b: Seg,
    proj: Option<(Seg, Seg)>,
    head_w: Option<Seg>,
    head_b: Seg,
}

fn layout(cfg: &TransformerConfig) -> (Vec<ParamBlock>, Segs) {
    let mut blocks = Vec::new();
    let mut off = 0;
    let mut push = |name: String, rows: usize, cols: usize, init: Init| {
        let decay = init == Init::Normal;
        blocks.push(ParamBlock { name, offset: off, rows, cols, init, decay });
        let s = Seg { off, len: rows * cols };
        off += rows * cols;
        s
    };
    let (v, d, a, f) = (cfg.vocab_size, cfg.embed_dim, cfg.attn_dim(), cfg.ffn_dim);
    let tok = push("tok_embed".into(), v, d, Init::Normal);
    let pos = push("pos_embed".into(), cfg.max_positions, d, Init::Normal);
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let n = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerSegs {
            ln1_g: push(n("ln1.scale"), 1, d, Init::Ones),
            ln1_b: push(n("ln1.shift"), 1, d, Init::Zeros),
            wq: push(n("attn.wq"), d, a, Init::Normal),
            bq: push(n("attn.bq"), 1, a, Init::Zeros),
            wk: push(n("attn.wk"), d, a, Init::Normal),
            bk: push(n("attn.bk"), 1, a, Init::Zeros),
            wv: push(n("attn.wv"), d, a, Init::Normal),
            bv: push(n("attn.bv"), 1, a, Init::Zeros),
            wo: push(n("attn.wo"), a, d, Init::Normal),
            bo: push(n("attn.bo"), 1, d, Init::Zeros),
            ln2_g: push(n("ln2.scale"), 1, d, Init::Ones),
            ln2_b: push(n("ln2.shift"), 1, d, Init::Zeros),
            w1: push(n("ffn.w1"), d, f, Init::Normal),
            b1: push(n("ffn.b1"), 1, f, Init::Zeros),
            w2: push(n("ffn.w2"), f, d, Init::Normal),
            b2: push(n("ffn.b2"), 1, d, Init::Zeros),
        });
    }
    let lnf_g = push("final_ln.scale".into(), 1, d, Init::Ones);
    let lnf_b = push("final_ln.shift".into(), 1, d, Init::Zeros);
    let proj = cfg.output_dim.map(|o| {
        (
            push("out_proj.w".into(), d, o, Init::Normal),
            push("out_proj.b".into(), 1, o, Init::Zeros),
        )
    });
    let head_w = (!cfg.tie_embeddings).then(|| push("head.w".into(), cfg.head_in_dim(), v, Init::Normal));
    let head_b = push("head.b".into(), 1, v, Init::Zeros);
    (blocks, Segs { tok, pos, layers, lnf_g, lnf_b, proj, head_w, head_b })
}

/// A batch of variable-length sequences packed row after row; no padding is
/// ever materialized, so padding cannot reach attention or the loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    ids: Vec<u32>,
    targets: Vec<u32>,
    offsets: Vec<usize>,
}

impl Batch {
    /// Inputs only, for forward passes without a loss.
    pub fn from_inputs<S: AsRef<[u32]>>(seqs: &[S]) -> Batch {
        let mut b = Batch { ids: Vec::new(), targets: Vec::new(), offsets: vec![0] };
        for s in seqs {
            b.ids.extend_from_slice(s.as_ref());
            b.offsets.push(b.ids.len());
        }
        b
    }

    /// Framed sequences (`BOS ... EOS`): position `t` predicts token `t + 1`.
    /// Sequences shorter than two tokens carry no target and are dropped.
    pub fn from_framed<S: AsRef<[u32]>>(seqs: &[S]) -> Batch {
        let mut b = Batch { ids: Vec::new(), targets: Vec::new(), offsets: vec![0] };
        for s in seqs {
            let s = s.as_ref();
            if s.len() < 2 {
                continue;
            }
            b.ids.extend_from_slice(&s[..s.len() - 1]);
            b.targets.extend_from_slice(&s[1..]);
            b.offsets.push(b.ids.len());
        }
        b
    }

    /// Unpacks a padded `rows x width` id matrix using per-row lengths.
    pub fn from_padded(ids: &[u32], width: usize, lengths: &[usize]) -> Result<Batch> {
        if ids.len() != width * lengths.len() || lengths.iter().any(|&l| l > width) {
            return Err(Error::Shape(format!(
                "{} ids for {} rows of width {width}",
                ids.len(),
                lengths.len()
            )));
        }
        let seqs: Vec<&[u32]> = lengths.iter().enumerate().map(|(r, &l)| &ids[r * width..r * width + l]).collect();
        Ok(Batch::from_inputs(&seqs))
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn num_sequences(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn has_targets(&self) -> bool {
        !self.targets.is_empty() || self.ids.is_empty()
    }

    pub fn sequence(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    fn seqs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.offsets.windows(2).map(|w| (w[0], w[1] - w[0]))
    }
}

struct LnCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

fn layer_norm<T: Real>(x: &[T], d: usize, g: &[T], b: &[T]) -> (Vec<T>, LnCache<T>) {
    let rows = x.len() / d;
    let dn = T::lit(d as f64);
    let eps = T::lit(LN_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().sum::<T>() / dn;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * g[j] + b[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Adds the input gradient to `dx` and accumulates scale/shift gradients.
fn layer_norm_backward<T: Real>(
    c: &LnCache<T>,
    dy: &[T],
    d: usize,
    g: &[T],
    dg: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let dn = T::lit(d as f64);
    let mut dxhat = vec![T::zero(); d];
    for (r, &rs) in c.rstd.iter().enumerate() {
        let xh = &c.xhat[r * d..(r + 1) * d];
        let dyr = &dy[r * d..(r + 1) * d];
        let (mut m1, mut m2) = (T::zero(), T::zero());
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xh[j];
        }
        m1 /= dn;
        m2 /= dn;
        let dxr = &mut dx[r * d..(r + 1) * d];
        for j in 0..d {
            dxr[j] += rs * (dxhat[j] - m1 - xh[j] * m2);
        }
    }
}

struct LayerCache<T> {
    ln1: LnCache<T>,
    h1: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// Per (sequence, head) `t x t` normalized weights.
    probs: Vec<Vec<T>>,
    att_keep: Option<Vec<Vec<T>>>,
    ctx: Vec<T>,
    ln2: LnCache<T>,
    h2: Vec<T>,
    f_pre: Vec<T>,
    f_act: Vec<T>,
    f_keep: Option<Vec<T>>,
}

pub(crate) struct Cache<T> {
    layers: Vec<LayerCache<T>>,
    lnf: LnCache<T>,
    hf: Vec<T>,
    z: Option<Vec<T>>,
}

/// Inverted dropout mask: each entry is 0 with probability `drop`, else
/// `1 / (1 - drop)`.
fn dropout_mask<T: Real>(n: usize, drop: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let cut = (drop * 4_294_967_296.0) as u64;
    let keep = T::lit(1.0 / (1.0 - drop));
    (0..n).map(|_| if u64::from(rng.next_u32()) < cut { T::zero() } else { keep }).collect()
}

/// Autoregressive transformer language model with a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerLM {
    config: TransformerConfig,
    blocks: Vec<ParamBlock>,
    segs: Segs,
    params: Vec<f64>,
}

impl TransformerLM {
    /// Normal(0, 0.02) weights and embeddings, zero biases and shifts, unit
    /// norm scales.
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for b in &m.blocks {
            let p = &mut m.params[b.range()];
            match b.init {
                Init::Normal => p.iter_mut().for_each(|x| *x = normal.sample(&mut rng)),
                Init::Ones => p.fill(1.0),
                Init::Zeros => {}
            }
        }
        Ok(m)
    }

    /// All parameters zero, including norm scales.
    pub fn zeros(config: TransformerConfig) -> Result<Self> {
        config.validate()?;
        let (blocks, segs) = layout(&config);
        let n = blocks.last().map_or(0, |b| b.offset + b.len());
        debug_assert_eq!(n, config.param_count());
        Ok(TransformerLM { config, blocks, segs, params: vec![0.0; n] })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn params_and_blocks_mut(&mut self) -> (&mut [f64], &[ParamBlock]) {
        (&mut self.params, &self.blocks)
    }

    fn check(&self, batch: &Batch) -> Result<()> {
        let v = self.config.vocab_size;
        if let Some(&id) = batch.ids.iter().chain(&batch.targets).find(|&&id| id as usize >= v) {
            return Err(Error::TokenOutOfRange { id, size: v });
        }
        for (_, t) in batch.seqs() {
            if t > self.config.max_positions {
                return Err(Error::SequenceTooLong { len: t, max: self.config.max_positions });
            }
        }
        Ok(())
    }

    /// Next-token logits, one row of `vocab_size` per packed position.
    /// Dropout is off.
    pub fn forward(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.check(batch)?;
        Ok(self.run_forward(&self.params, batch, None).0)
    }

    /// Forward pass with parameters `p` laid out like `self.params`, possibly
    /// at a different precision.
    pub(crate) fn run_forward<T: Real>(
        &self,
        p: &[T],
        batch: &Batch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Vec<T>, Cache<T>) {
        let cfg = &self.config;
        let s = &self.segs;
        let (d, a, f, hd) = (cfg.embed_dim, cfg.attn_dim(), cfg.ffn_dim, cfg.head_dim);
        let rows = batch.rows();
        let drop = if rng.is_some() { cfg.dropout } else { 0.0 };
        let spec = AttentionSpec::of(cfg);

        let tok = s.tok.of(p);
        let pos = s.pos.of(p);
        let mut x = vec![T::zero(); rows * d];
        for (start, t) in batch.seqs() {
            for i in 0..t {
                let r = start + i;
                let id = batch.ids[r] as usize;
                let xr = &mut x[r * d..(r + 1) * d];
                for j in 0..d {
                    xr[j] = tok[id * d + j] + pos[i * d + j];
                }
            }
        }

        let mut layers = Vec::with_capacity(cfg.layers);
        let mut scratch = HeadScratch::default();
        let (mut qh, mut kh, mut vh, mut oh) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for ls in &s.layers {
            let (h1, ln1) = layer_norm(&x, d, ls.ln1_g.of(p), ls.ln1_b.of(p));
            let q = linear(&h1, rows, d, ls.wq.of(p), ls.bq.of(p), a);
            let k = linear(&h1, rows, d, ls.wk.of(p), ls.bk.of(p), a);
            let v = linear(&h1, rows, d, ls.wv.of(p), ls.bv.of(p), a);
            let mut ctx = vec![T::zero(); rows * a];
            let mut probs = Vec::with_capacity(batch.num_sequences() * cfg.heads);
            let mut att_keep = (drop > 0.0).then(Vec::new);
            for (start, t) in batch.seqs() {
                for h in 0..cfg.heads {
                    gather(&q, start, t, a, h * hd, hd, &mut qh);
                    gather(&k, start, t, a, h * hd, hd, &mut kh);
                    gather(&v, start, t, a, h * hd, hd, &mut vh);
                    let keep = match (&mut att_keep, rng.as_deref_mut()) {
                        (Some(all), Some(r)) => {
                            all.push(dropout_mask(t * t, drop, r));
                            all.last().map(Vec::as_slice)
                        }
                        _ => None,
                    };
                    let mut pr = vec![T::zero(); t * t];
                    oh.clear();
                    oh.resize(t * hd, T::zero());
                    head_forward(&qh, &kh, &vh, t, hd, spec, &mut pr, keep, &mut oh, &mut scratch);
                    scatter(&oh, start, t, a, h * hd, hd, &mut ctx);
                    probs.push(pr);
                }
            }
            let att = linear(&ctx, rows, a, ls.wo.of(p), ls.bo.of(p), d);
            for (xi, &ai) in x.iter_mut().zip(&att) {
                *xi += ai;
            }
            let (h2, ln2) = layer_norm(&x, d, ls.ln2_g.of(p), ls.ln2_b.of(p));
            let f_pre = linear(&h2, rows, d, ls.w1.of(p), ls.b1.of(p), f);
            let mut f_act: Vec<T> = f_pre.iter().map(|&u| u.max(T::zero())).collect();
            let f_keep = match rng.as_deref_mut() {
                Some(r) if drop > 0.0 => {
                    let m = dropout_mask(rows * f, drop, r);
                    for (u, &mi) in f_act.iter_mut().zip(&m) {
                        *u *= mi;
                    }
                    Some(m)
                }
                _ => None,
            };
            let ffn = linear(&f_act, rows, f, ls.w2.of(p), ls.b2.of(p), d);
            for (xi, &fi) in x.iter_mut().zip(&ffn) {
                *xi += fi;
            }
            layers.push(LayerCache { ln1, h1, q, k, v, probs, att_keep, ctx, ln2, h2, f_pre, f_act, f_keep });
        }

        let (hf, lnf) = layer_norm(&x, d, s.lnf_g.of(p), s.lnf_b.of(p));
        let z = s.proj.map(|(w, b)| linear(&hf, rows, d, w.of(p), b.of(p), cfg.head_in_dim()));
        let zin = z.as_deref().unwrap_or(&hf);
        let logits = self.head(p, zin, rows);
        (logits, Cache { layers, lnf, hf, z })
    }

    fn head<T: Real>(&self, p: &[T], z: &[T], rows: usize) -> Vec<T> {
        let (o, v) = (self.config.head_in_dim(), self.config.vocab_size);
        match self.segs.head_w {
            Some(w) => linear(z, rows, o, w.of(p), self.segs.head_b.of(p), v),
            None => {
                let mut y = Vec::with_capacity(rows * v);
                for _ in 0..rows {
                    y.extend_from_slice(self.segs.head_b.of(p));
                }
                gemm(rows, o, v, z, false, self.segs.tok.of(p), true, &mut y, T::one());
                y
            }
        }
    }

    pub(crate) fn backward<T: Real>(&self, p: &[T], batch: &Batch, cache: &Cache<T>, dlogits: &[T]) -> Vec<T> {
        let cfg = &self.config;
        let s = &self.segs;
        let (d, a, f, hd, o, v) = (
            cfg.embed_dim,
            cfg.attn_dim(),
            cfg.ffn_dim,
            cfg.head_dim,
            cfg.head_in_dim(),
            cfg.vocab_size,
        );
        let rows = batch.rows();
        let spec = AttentionSpec::of(cfg);
        let zero = T::zero();
        let mut g = vec![zero; p.len()];

        let zin = cache.z.as_deref().unwrap_or(&cache.hf);
        let dz = match s.head_w {
            Some(w) => {
                let (dw, db) = split2(&mut g, w, s.head_b);
                linear_backward(zin, dlogits, rows, o, v, w.of(p), dw, db)
            }
            None => {
                let (dt, db) = split2(&mut g, s.tok, s.head_b);
                gemm(v, rows, o, dlogits, true, zin, false, dt, T::one());
                for r in dlogits.chunks_exact(v) {
                    for (x, &y) in db.iter_mut().zip(r) {
                        *x += y;
                    }
                }
                let mut dz = vec![zero; rows * o];
                gemm(rows, v, o, dlogits, false, s.tok.of(p), false, &mut dz, zero);
                dz
            }
        };
        let dhf = match s.proj {
            Some((w, b)) => {
                let (dw, db) = split2(&mut g, w, b);
                linear_backward(&cache.hf, &dz, rows, d, o, w.of(p), dw, db)
            }
            None => dz,
        };
        let mut dx = vec![zero; rows * d];
        {
            let (dg, db) = split2(&mut g, s.lnf_g, s.lnf_b);
            layer_norm_backward(&cache.lnf, &dhf, d, s.lnf_g.of(p), dg, db, &mut dx);
        }

        let (mut qh, mut kh, mut vh, mut doh) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut dqh, mut dkh, mut dvh) = (Vec::new(), Vec::new(), Vec::new());
        for (ls, lc) in s.layers.iter().zip(&cache.layers).rev() {
            // FFN sublayer
            let mut dfpre = {
                let (dw, db) = split2(&mut g, ls.w2, ls.b2);
                linear_backward(&lc.f_act, &dx, rows, f, d, ls.w2.of(p), dw, db)
            };
            match &lc.f_keep {
                Some(k) => {
                    for ((df, &u), &m) in dfpre.iter_mut().zip(&lc.f_pre).zip(k) {
                        *df = if u > zero { *df * m } else { zero };
                    }
                }
                None => {
                    for (df, &u) in dfpre.iter_mut().zip(&lc.f_pre) {
                        if u <= zero {
                            *df = zero;
                        }
                    }
                }
            }
            let dh2 = {
                let (dw, db) = split2(&mut g, ls.w1, ls.b1);
                linear_backward(&lc.h2, &dfpre, rows, d, f, ls.w1.of(p), dw, db)
            };
            {
                let (dg, db) = split2(&mut g, ls.ln2_g, ls.ln2_b);
                layer_norm_backward(&lc.ln2, &dh2, d, ls.ln2_g.of(p), dg, db, &mut dx);
            }

            // attention sublayer
            let dctx = {
                let (dw, db) = split2(&mut g, ls.wo, ls.bo);
                linear_backward(&lc.ctx, &dx, rows, a, d, ls.wo.of(p), dw, db)
            };
            let mut dq = vec![zero; rows * a];
            let mut dk = vec![zero; rows * a];
            let mut dv = vec![zero; rows * a];
            let mut idx = 0;
            for (start, t) in batch.seqs() {
                for h in 0..cfg.heads {
                    gather(&lc.q, start, t, a, h * hd, hd, &mut qh);
                    gather(&lc.k, start, t, a, h * hd, hd, &mut kh);
                    gather(&lc.v, start, t, a, h * hd, hd, &mut vh);
                    gather(&dctx, start, t, a, h * hd, hd, &mut doh);
                    for buf in [&mut dqh, &mut dkh, &mut dvh] {
                        buf.clear();
                        buf.resize(t * hd, zero);
                    }
                    let keep = lc.att_keep.as_ref().map(|k| k[idx].as_slice());
                    head_backward(
                        &qh, &kh, &vh, t, hd, spec, &lc.probs[idx], keep, &doh, &mut dqh, &mut dkh, &mut dvh,
                    );
                    scatter(&dqh, start, t, a, h * hd, hd, &mut dq);
                    scatter(&dkh, start, t, a, h * hd, hd, &mut dk);
                    scatter(&dvh, start, t, a, h * hd, hd, &mut dv);
                    idx += 1;
                }
            }
            let mut dh1 = {
                let (dw, db) = split2(&mut g, ls.wq, ls.bq);
                linear_backward(&lc.h1, &dq, rows, d, a, ls.wq.of(p), dw, db)
            };
            for (w, b, dy) in [(ls.wk, ls.bk, &dk), (ls.wv, ls.bv, &dv)] {
                let (dw, db) = split2(&mut g, w, b);
                let part = linear_backward(&lc.h1, dy, rows, d, a, w.of(p), dw, db);
                for (x, &y) in dh1.iter_mut().zip(&part) {
                    *x += y;
                }
            }
            let (dg, db) = split2(&mut g, ls.ln1_g, ls.ln1_b);
            layer_norm_backward(&lc.ln1, &dh1, d, ls.ln1_g.of(p), dg, db, &mut dx);
        }

        let (dtok, dpos) = split2(&mut g, s.tok, s.pos);
        for (start, t) in batch.seqs() {
            for i in 0..t {
                let r = start + i;
                let id = batch.ids[r] as usize;
                for j in 0..d {
                    dtok[id * d + j] += dx[r * d + j];
                    dpos[i * d + j] += dx[r * d + j];
                }
            }
        }
        g
    }

    /// Mean next-token cross-entropy over the batch targets and its gradient.
    /// `rng` enables dropout.
    pub fn loss_and_grad(&self, batch: &Batch, rng: Option<&mut ChaCha8Rng>) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grad_at(&self.params, batch, rng)
    }

    /// [`Self::loss_and_grad`] evaluated at `p`, a copy of the parameters in
    /// the compute precision `T`.
    pub(crate) fn loss_and_grad_at<T: Real>(
        &self,
        p: &[T],
        batch: &Batch,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<T>)> {
        self.check(batch)?;
        if batch.targets.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (logits, cache) = self.run_forward(p, batch, rng);
        let (loss, dlogits) = cross_entropy(&logits, self.config.vocab_size, &batch.targets, true);
        let grad = self.backward(p, batch, &cache, &dlogits);
        Ok((loss, grad))
    }

    /// Mean cross-entropy with dropout off.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        self.check(batch)?;
        if batch.targets.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (logits, _) = self.run_forward(&self.params, batch, None);
        Ok(cross_entropy(&logits, self.config.vocab_size, &batch.targets, false).0)
    }

    /// Sum of target log-probabilities per sequence, dropout off.
    pub fn sequence_logprobs(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.check(batch)?;
        if !batch.has_targets() {
            return Err(Error::EmptyInput);
        }
        let logits = self.run_forward(&self.params, batch, None).0;
        let v = self.config.vocab_size;
        Ok(batch
            .seqs()
            .map(|(start, t)| {
                (start..start + t)
                    .map(|r| log_softmax_at(&logits[r * v..(r + 1) * v], batch.targets[r] as usize))
                    .sum()
            })
            .collect())
    }
}

fn split2<T>(g: &mut [T], a: Seg, b: Seg) -> (&mut [T], &mut [T]) {
    debug_assert!(a.off + a.len <= b.off || b.off + b.len <= a.off);
    if a.off < b.off {
        let (lo, hi) = g.split_at_mut(b.off);
        (a.of_mut(lo), &mut hi[..b.len])
    } else {
        let (lo, hi) = g.split_at_mut(a.off);
        (&mut hi[..a.len], b.of_mut(lo))
    }
}

/// Copies columns `col..col+w` of rows `start..start+t` into `out` (`t x w`).
fn gather<T: Copy>(src: &[T], start: usize, t: usize, stride: usize, col: usize, w: usize, out: &mut Vec<T>) {
    out.clear();
    for r in start..start + t {
        out.extend_from_slice(&src[r * stride + col..r * stride + col + w]);
    }
}

fn scatter<T: Copy>(src: &[T], start: usize, t: usize, stride: usize, col: usize, w: usize, dst: &mut [T]) {
    for i in 0..t {
        let r = start + i;
        dst[r * stride + col..r * stride + col + w].copy_from_slice(&src[i * w..(i + 1) * w]);
    }
}

pub(crate) fn log_softmax_at(row: &[f64], target: usize) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row[target] - lse
}

/// Mean negative log-likelihood and, if requested, its gradient.
fn cross_entropy<T: Real>(logits: &[T], v: usize, targets: &[u32], grad: bool) -> (f64, Vec<T>) {
    let n = targets.len() as f64;
    let inv_n = T::lit(1.0 / n);
    let mut total = 0.0;
    let mut d = if grad { vec![T::zero(); logits.len()] } else { Vec::new() };
    for (r, &tgt) in targets.iter().enumerate() {
        let row = &logits[r * v..(r + 1) * v];
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&x| (x - m).exp()).sum();
        let lse = m + sum.ln();
        total += (lse - row[tgt as usize]).widen();
        if grad {
            let dr = &mut d[r * v..(r + 1) * v];
            for (o, &x) in dr.iter_mut().zip(row) {
                *o = (x - lse).exp() * inv_n;
            }
            dr[tgt as usize] -= inv_n;
        }
    }
    (total / n, d)
}

#[cfg(test)]
mod tests {
    use super::super::config::AttentionKind;
    use super::*;
    use rand::Rng;

    pub(crate) fn micro(attention: AttentionKind) -> TransformerConfig {
        TransformerConfig {
            vocab_size: 23,
            layers: 2,
            heads: 4,
            embed_dim: 16,
            head_dim: 8,
            ffn_dim: 32,
            max_positions: 16,
            output_dim: None,
            dropout: 0.1,
            attention,
            window_radius: Some(2),
            window_normalizer: super::super::config::WindowNormalizer::Sparsemax,
            tie_embeddings: false,
        }
    }

    fn seqs() -> Vec<Vec<u32>> {
        vec![vec![2, 5, 9, 4, 3], vec![2, 7, 3], vec![2, 11, 12, 13, 14, 15, 3], vec![2, 20, 3]]
    }

    #[test]
    fn layout_matches_count() {
        for att in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
            let mut c = micro(att);
            let m = TransformerLM::new(c.clone(), 1).unwrap();
            assert_eq!(m.param_count(), c.param_count());
            c.output_dim = Some(8);
            assert_eq!(TransformerLM::new(c.clone(), 1).unwrap().param_count(), c.param_count());
            c.output_dim = None;
            c.tie_embeddings = true;
            assert_eq!(TransformerLM::new(c.clone(), 1).unwrap().param_count(), c.param_count());
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = TransformerLM::zeros(micro(AttentionKind::Softmax)).unwrap();
        let b = Batch::from_framed(&seqs());
        let loss = m.loss(&b).unwrap();
        assert!((loss - 23f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn output_bias_alone_sets_distribution() {
        let mut m = TransformerLM::zeros(micro(AttentionKind::SparseWindow)).unwrap();
        let hb = m.block("head.b").unwrap().range();
        for (i, x) in m.params_mut()[hb].iter_mut().enumerate() {
            *x = (i as f64 * 0.3).sin();
        }
        let logits = m.forward(&Batch::from_inputs(&seqs())).unwrap();
        let first = logits[..23].to_vec();
        for row in logits.chunks_exact(23) {
            assert_eq!(row, &first[..]);
        }
    }

    #[test]
    fn duplicated_sequences_get_identical_logits() {
        let m = TransformerLM::new(micro(AttentionKind::SparseWindow), 4).unwrap();
        let s = &seqs()[2];
        let single = m.forward(&Batch::from_inputs(&[s])).unwrap();
        let double = m.forward(&Batch::from_inputs(&[s, s])).unwrap();
        assert_eq!(&double[..single.len()], &single[..]);
        assert_eq!(&double[single.len()..], &single[..]);
    }

    #[test]
    fn causal_logits_ignore_future_tokens() {
        for att in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
            let m = TransformerLM::new(micro(att), 5).unwrap();
            let a = vec![2u32, 5, 9, 4, 8, 1];
            let mut b = a.clone();
            b[4] = 17;
            b[5] = 6;
            let la = m.forward(&Batch::from_inputs(&[&a])).unwrap();
            let lb = m.forward(&Batch::from_inputs(&[&b])).unwrap();
            assert_eq!(&la[..4 * 23], &lb[..4 * 23]);
            assert_ne!(&la[4 * 23..], &lb[4 * 23..]);
        }
    }

    #[test]
    fn padded_batches_unpack() {
        let ids = [2, 5, 9, 0, 0, 2, 7, 3, 4, 0];
        let b = Batch::from_padded(&ids, 5, &[3, 4]).unwrap();
        assert_eq!(b, Batch::from_inputs(&[vec![2, 5, 9], vec![2, 7, 3, 4]]));
        assert!(Batch::from_padded(&ids, 5, &[3, 6]).is_err());
    }

    #[test]
    fn rejects_bad_ids_and_lengths() {
        let m = TransformerLM::new(micro(AttentionKind::Softmax), 1).unwrap();
        assert!(matches!(
            m.forward(&Batch::from_inputs(&[vec![2u32, 99]])),
            Err(Error::TokenOutOfRange { id: 99, .. })
        ));
        let long: Vec<u32> = (0..17).map(|i| i % 20).collect();
        assert!(matches!(m.forward(&Batch::from_inputs(&[long])), Err(Error::SequenceTooLong { .. })));
    }

    fn grad_check(cfg: TransformerConfig, seed: u64) {
        let mut m = TransformerLM::new(cfg, seed).unwrap();
        // break the symmetry of unit scales and zero biases
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for x in m.params_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
        let b = Batch::from_framed(&seqs());
        let (_, g) = m.loss_and_grad(&b, None).unwrap();
        let h = 1e-5;
        for blk in m.blocks().to_vec() {
            let (mut num, mut diff, mut den) = (0.0f64, 0.0f64, 0.0f64);
            for i in blk.range() {
                let orig = m.params[i];
                m.params[i] = orig + h;
                let lp = m.loss(&b).unwrap();
                m.params[i] = orig - h;
                let lm = m.loss(&b).unwrap();
                m.params[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                diff += (fd - g[i]).powi(2);
                num += fd * fd;
                den += g[i] * g[i];
            }
            // the key bias shifts a whole score row, which both normalizers
            // ignore, so its gradient is exactly zero
            let scale = num.sqrt().max(den.sqrt());
            if scale < 1e-8 {
                continue;
            }
            let rel = diff.sqrt() / scale;
            assert!(rel < 1e-4, "{}: relative error {rel:e}", blk.name);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        grad_check(micro(AttentionKind::Softmax), 11);
        grad_check(micro(AttentionKind::SparseWindow), 12);
        let mut c = micro(AttentionKind::SparseWindow);
        c.window_radius = None;
        c.output_dim = Some(8);
        grad_check(c, 13);
        let mut c = micro(AttentionKind::Softmax);
        c.tie_embeddings = true;
        grad_check(c, 14);
    }

    #[test]
    fn dropout_masks_are_seeded() {
        let m = TransformerLM::new(micro(AttentionKind::SparseWindow), 2).unwrap();
        let b = Batch::from_framed(&seqs());
        let run = |s| m.loss_and_grad(&b, Some(&mut ChaCha8Rng::seed_from_u64(s))).unwrap();
        let (l1, g1) = run(7);
        let (l2, g2) = run(7);
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
        assert_ne!(run(8).0, l1);
    }

    #[test]
    fn single_precision_pass_tracks_double() {
        for att in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
            let m = TransformerLM::new(micro(att), 4).unwrap();
            let b = Batch::from_framed(&seqs());
            let (l64, g64) = m.loss_and_grad(&b, None).unwrap();
            let p32: Vec<f32> = m.params().iter().map(|&x| x as f32).collect();
            let (l32, g32) = m.loss_and_grad_at(&p32, &b, None).unwrap();
            assert!((l64 - l32).abs() < 1e-5 * l64);
            let diff: f64 = g64.iter().zip(&g32).map(|(a, &b)| (a - b as f64).powi(2)).sum();
            let norm: f64 = g64.iter().map(|a| a * a).sum();
            assert!(diff.sqrt() < 1e-4 * norm.sqrt());
        }
    }
}

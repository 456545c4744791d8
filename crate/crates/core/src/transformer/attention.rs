//! Single-head causal attention with masked row normalization.

use super::config::{AttentionKind, TransformerConfig, WindowNormalizer};
use super::linalg::{gemm, Matrix, Real};
use super::sparsemax::{softmax_backward, softmax_into, sparsemax_backward, sparsemax_into};
use crate::error::{Error, Result};

/// How scores are masked and normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionSpec {
    pub kind: AttentionKind,
    pub window_radius: Option<usize>,
    pub normalizer: WindowNormalizer,
}

impl AttentionSpec {
    pub fn softmax() -> Self {
        AttentionSpec {
            kind: AttentionKind::Softmax,
            window_radius: None,
            normalizer: WindowNormalizer::Softmax,
        }
    }

    pub fn sparse_window(radius: Option<usize>) -> Self {
        AttentionSpec {
            kind: AttentionKind::SparseWindow,
            window_radius: radius,
            normalizer: WindowNormalizer::Sparsemax,
        }
    }

    pub(crate) fn of(cfg: &TransformerConfig) -> Self {
        AttentionSpec {
            kind: cfg.attention,
            window_radius: cfg.window_radius,
            normalizer: cfg.window_normalizer,
        }
    }

    fn start(&self, i: usize) -> usize {
        match (self.kind, self.window_radius) {
            (AttentionKind::SparseWindow, Some(r)) => i.saturating_sub(r),
            _ => 0,
        }
    }

    fn sparse(&self) -> bool {
        self.kind == AttentionKind::SparseWindow && self.normalizer == WindowNormalizer::Sparsemax
    }
}

/// Causal attention `norm(mask(Q K^T / sqrt(d_k))) V` for one head.
pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix, spec: AttentionSpec) -> Result<Matrix> {
    if v.rows != q.rows {
        return Err(Error::Shape(format!("V has {} rows, Q has {}", v.rows, q.rows)));
    }
    if v.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NaN);
    }
    let p = attention_weights(q, k, spec)?;
    let mut out = Matrix::zeros(q.rows, v.cols);
    gemm(q.rows, q.rows, v.cols, &p.data, false, &v.data, false, &mut out.data, 0.0);
    Ok(out)
}

/// The normalized `t x t` weight matrix; row `i` is zero outside its window.
pub fn attention_weights(q: &Matrix, k: &Matrix, spec: AttentionSpec) -> Result<Matrix> {
    if q.cols != k.cols || q.rows != k.rows || q.cols == 0 {
        return Err(Error::Shape(format!(
            "Q is {}x{}, K is {}x{}",
            q.rows, q.cols, k.rows, k.cols
        )));
    }
    if q.data.iter().chain(&k.data).any(|x| !x.is_finite()) {
        return Err(Error::NaN);
    }
    let t = q.rows;
    let mut p = Matrix::zeros(t, t);
    let mut s = vec![0.0; t * t];
    let mut head = HeadScratch::default();
    scores_and_weights(&q.data, &k.data, t, q.cols, spec, &mut s, &mut p.data, &mut head);
    Ok(p)
}

pub(crate) struct HeadScratch<T> {
    sorted: Vec<T>,
    row: Vec<T>,
}

impl<T> Default for HeadScratch<T> {
    fn default() -> Self {
        HeadScratch { sorted: Vec::new(), row: Vec::new() }
    }
}

#[allow(clippy::too_many_arguments)]
fn scores_and_weights<T: Real>(
    q: &[T],
    k: &[T],
    t: usize,
    hd: usize,
    spec: AttentionSpec,
    s: &mut [T],
    p: &mut [T],
    scratch: &mut HeadScratch<T>,
) {
    gemm(t, hd, t, q, false, k, true, s, T::zero());
    let scale = T::lit(1.0 / (hd as f64).sqrt());
    for i in 0..t {
        let lo = spec.start(i);
        let row = &mut p[i * t..(i + 1) * t];
        row.fill(T::zero());
        let z = &mut s[i * t + lo..=i * t + i];
        for x in z.iter_mut() {
            *x *= scale;
        }
        if spec.sparse() {
            sparsemax_into(z, &mut row[lo..=i], &mut scratch.sorted);
        } else {
            softmax_into(z, &mut row[lo..=i]);
        }
    }
}

/// Forward pass for one head inside the model. `keep` holds per-weight
/// dropout scales (0 or `1/(1-p)`) when dropout is active.
#[allow(clippy::too_many_arguments)]
pub(crate) fn head_forward<T: Real>(
    q: &[T],
    k: &[T],
    v: &[T],
    t: usize,
    hd: usize,
    spec: AttentionSpec,
    p: &mut [T],
    keep: Option<&[T]>,
    out: &mut [T],
    scratch: &mut HeadScratch<T>,
) {
    let mut s = std::mem::take(&mut scratch.row);
    s.clear();
    s.resize(t * t, T::zero());
    scores_and_weights(q, k, t, hd, spec, &mut s, p, scratch);
    match keep {
        Some(m) => {
            for (x, (&pi, &mi)) in s.iter_mut().zip(p.iter().zip(m)) {
                *x = pi * mi;
            }
            gemm(t, t, hd, &s, false, v, false, out, T::zero());
        }
        None => gemm(t, t, hd, p, false, v, false, out, T::zero()),
    }
    scratch.row = s;
}

/// Gradients of one head with respect to its `q`, `k`, `v` inputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn head_backward<T: Real>(
    q: &[T],
    k: &[T],
    v: &[T],
    t: usize,
    hd: usize,
    spec: AttentionSpec,
    p: &[T],
    keep: Option<&[T]>,
    dout: &[T],
    dq: &mut [T],
    dk: &mut [T],
    dv: &mut [T],
) {
    let pd: Vec<T> = match keep {
        Some(m) => p.iter().zip(m).map(|(&a, &b)| a * b).collect(),
        None => p.to_vec(),
    };
    // dv = pd^T dout
    gemm(t, t, hd, &pd, true, dout, false, dv, T::zero());
    // dpd = dout v^T
    let mut dp = vec![T::zero(); t * t];
    gemm(t, hd, t, dout, false, v, true, &mut dp, T::zero());
    if let Some(m) = keep {
        for (d, &mi) in dp.iter_mut().zip(m) {
            *d *= mi;
        }
    }
    let scale = T::lit(1.0 / (hd as f64).sqrt());
    let mut ds = vec![T::zero(); t * t];
    for i in 0..t {
        let lo = spec.start(i);
        let (a, b) = (i * t + lo, i * t + i + 1);
        if spec.sparse() {
            sparsemax_backward(&p[a..b], &dp[a..b], &mut ds[a..b]);
        } else {
            softmax_backward(&p[a..b], &dp[a..b], &mut ds[a..b]);
        }
        for x in &mut ds[a..b] {
            *x *= scale;
        }
    }
    gemm(t, t, hd, &ds, false, k, false, dq, T::zero());
    gemm(t, t, hd, &ds, true, q, false, dk, T::zero());
}

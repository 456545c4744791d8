use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionKind {
    #[serde(alias = "soft")]
    Softmax,
    /// Causal attention restricted to `[i - r, i]` (or all of `[0, i]` when
    /// the radius is `None`), normalized by [`WindowNormalizer`].
    #[serde(alias = "sparse")]
    SparseWindow,
}

impl AttentionKind {
    pub fn name(self) -> &'static str {
        match self {
            AttentionKind::Softmax => "soft",
            AttentionKind::SparseWindow => "sparse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowNormalizer {
    Sparsemax,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub head_dim: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    /// Width of an extra projection between the final norm and the vocab
    /// head. `None` feeds the normalized hidden state straight to the head.
    pub output_dim: Option<usize>,
    pub dropout: f64,
    pub attention: AttentionKind,
    pub window_radius: Option<usize>,
    pub window_normalizer: WindowNormalizer,
    /// Reuse the token embedding as the vocab head weight.
    pub tie_embeddings: bool,
}

impl TransformerConfig {
    pub const DEFAULT_EMBED: usize = 128;
    pub const DEFAULT_HEAD_DIM: usize = 32;
    pub const DEFAULT_FFN: usize = 2048;
    pub const DEFAULT_MAX_POSITIONS: usize = 1024;
    pub const DEFAULT_DROPOUT: f64 = 0.1;
    pub const DEFAULT_WINDOW: usize = 2;

    /// The grid architecture: 128-d embeddings, 32-d heads, 2048-d FFN.
    pub fn grid(vocab_size: usize, layers: usize, heads: usize, attention: AttentionKind) -> Self {
        TransformerConfig {
            vocab_size,
            layers,
            heads,
            embed_dim: Self::DEFAULT_EMBED,
            head_dim: Self::DEFAULT_HEAD_DIM,
            ffn_dim: Self::DEFAULT_FFN,
            max_positions: Self::DEFAULT_MAX_POSITIONS,
            output_dim: None,
            dropout: Self::DEFAULT_DROPOUT,
            attention,
            window_radius: Some(Self::DEFAULT_WINDOW),
            window_normalizer: WindowNormalizer::Sparsemax,
            tie_embeddings: false,
        }
    }

    /// Larger preset: embedding 256, hidden 512, output 128, two layers of
    /// four heads.
    pub fn large(vocab_size: usize) -> Self {
        TransformerConfig {
            embed_dim: 256,
            ffn_dim: 512,
            output_dim: Some(128),
            ..Self::grid(vocab_size, 2, 4, AttentionKind::Softmax)
        }
    }

    pub fn attn_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Width of the vector the vocab head reads.
    pub fn head_in_dim(&self) -> usize {
        self.output_dim.unwrap_or(self.embed_dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive");
        }
        if self.layers == 0 || self.heads == 0 {
            return bad("layers and heads must be positive");
        }
        if self.embed_dim == 0 || self.head_dim == 0 || self.ffn_dim == 0 || self.max_positions == 0 {
            return bad("dimensions must be positive");
        }
        if self.output_dim == Some(0) {
            return bad("output_dim must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.tie_embeddings && self.head_in_dim() != self.embed_dim {
            return bad("tied embeddings need output_dim equal to embed_dim");
        }
        Ok(())
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let (v, d, a, f, o) = (
            self.vocab_size,
            self.embed_dim,
            self.attn_dim(),
            self.ffn_dim,
            self.head_in_dim(),
        );
        let layer = 2 * d + 3 * (d * a + a) + (a * d + d) + 2 * d + (d * f + f) + (f * d + d);
        let proj = self.output_dim.map_or(0, |o| d * o + o);
        let head = if self.tie_embeddings { v } else { o * v + v };
        v * d + self.max_positions * d + self.layers * layer + 2 * d + proj + head
    }
}

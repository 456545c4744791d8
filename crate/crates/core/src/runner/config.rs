use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bias_eval::{load_pairs, SentencePair};
use crate::corpus::{load_corpus, load_synthetic, Corpus};
use crate::error::{Error, Result};
use crate::ngram::SmoothingSpec;
use crate::synth;
use crate::tokenize::DEFAULT_VOCAB_SIZE;
use crate::transformer::{AttentionKind, Precision, TrainSpec, TransformerConfig};

/// Declarative experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    /// Cells run concurrently; 0 uses every core.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_injection")]
    pub injection: Vec<f64>,
    pub corpora: Vec<CorpusSource>,
    pub bias_set: SyntheticSource,
    pub pairs: PairSource,
    #[serde(default)]
    pub ngram: Option<NgramAxes>,
    #[serde(default)]
    pub transformer: Option<TransformerAxes>,
    #[serde(default)]
    pub scale: Option<ScaleAxes>,
    #[serde(default)]
    pub disjoint: Option<DisjointAxes>,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn one() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_injection() -> Vec<f64> {
    vec![0.0, 0.33, 1.0]
}

/// A base corpus: a one-sentence-per-line file or a generated stand-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub label: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<Generate>,
    /// Seeded subsample to this many sentences after loading.
    #[serde(default)]
    pub max_sentences: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub sentences: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    #[serde(default = "default_bias_label")]
    pub label: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Optional per-line category file aligned with `path`.
    #[serde(default)]
    pub categories: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<Generate>,
}

fn default_bias_label() -> String {
    "bias".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Seed for generated pairs with the reference category mix.
    #[serde(default)]
    pub generate_seed: Option<u64>,
    /// Per-category counts for generated pairs, in category order.
    #[serde(default)]
    pub generate_counts: Option<[usize; 9]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingKind {
    Laplace,
    AddLambda,
    KneserNey,
}

impl SmoothingKind {
    pub fn name(self) -> &'static str {
        match self {
            SmoothingKind::Laplace => "laplace",
            SmoothingKind::AddLambda => "add-lambda",
            SmoothingKind::KneserNey => "kneser-ney",
        }
    }

    pub fn spec(self, lambda: f64) -> Result<SmoothingSpec> {
        Ok(match self {
            SmoothingKind::Laplace => SmoothingSpec::Laplace,
            SmoothingKind::AddLambda => SmoothingSpec::add_lambda(lambda)?,
            SmoothingKind::KneserNey => SmoothingSpec::kneser_ney(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramAxes {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_smoothing")]
    pub smoothing: Vec<SmoothingKind>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_orders() -> Vec<usize> {
    vec![2, 4, 6]
}

fn default_smoothing() -> Vec<SmoothingKind> {
    vec![SmoothingKind::Laplace, SmoothingKind::AddLambda, SmoothingKind::KneserNey]
}

fn default_lambda() -> f64 {
    0.1
}

impl Default for NgramAxes {
    fn default() -> Self {
        NgramAxes {
            orders: default_orders(),
            smoothing: default_smoothing(),
            lambda: default_lambda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerAxes {
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    #[serde(default = "default_heads")]
    pub heads: Vec<usize>,
    #[serde(default = "default_attention")]
    pub attention: Vec<AttentionKind>,
    #[serde(default)]
    pub model: ModelHyper,
    #[serde(default)]
    pub train: TrainHyper,
}

fn default_layers() -> Vec<usize> {
    vec![2, 4, 6]
}

fn default_heads() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_attention() -> Vec<AttentionKind> {
    vec![AttentionKind::Softmax, AttentionKind::SparseWindow]
}

impl Default for TransformerAxes {
    fn default() -> Self {
        TransformerAxes {
            layers: default_layers(),
            heads: default_heads(),
            attention: default_attention(),
            model: ModelHyper::default(),
            train: TrainHyper::default(),
        }
    }
}

/// Architecture settings shared by every transformer cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelHyper {
    pub embed_dim: usize,
    pub head_dim: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub output_dim: Option<usize>,
    pub dropout: f64,
    pub window_radius: Option<usize>,
    pub tie_embeddings: bool,
    pub bpe_vocab: usize,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            embed_dim: TransformerConfig::DEFAULT_EMBED,
            head_dim: TransformerConfig::DEFAULT_HEAD_DIM,
            ffn_dim: TransformerConfig::DEFAULT_FFN,
            max_positions: TransformerConfig::DEFAULT_MAX_POSITIONS,
            output_dim: None,
            dropout: TransformerConfig::DEFAULT_DROPOUT,
            window_radius: Some(TransformerConfig::DEFAULT_WINDOW),
            tie_embeddings: false,
            bpe_vocab: DEFAULT_VOCAB_SIZE,
        }
    }
}

impl ModelHyper {
    pub fn config(&self, vocab: usize, layers: usize, heads: usize, attention: AttentionKind) -> TransformerConfig {
        TransformerConfig {
            embed_dim: self.embed_dim,
            head_dim: self.head_dim,
            ffn_dim: self.ffn_dim,
            max_positions: self.max_positions,
            output_dim: self.output_dim,
            dropout: self.dropout,
            window_radius: self.window_radius,
            tie_embeddings: self.tie_embeddings,
            ..TransformerConfig::grid(vocab, layers, heads, attention)
        }
    }
}

/// Optimizer settings; the seed comes from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_len: usize,
    pub precision: Precision,
}

impl Default for TrainHyper {
    fn default() -> Self {
        let t = TrainSpec::default();
        TrainHyper {
            epochs: t.epochs,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            max_len: t.max_len,
            precision: t.precision,
        }
    }
}

impl TrainHyper {
    pub fn spec(&self, seed: u64) -> TrainSpec {
        TrainSpec {
            epochs: self.epochs,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_len: self.max_len,
            seed,
            precision: self.precision,
        }
    }
}

/// Fixed biased set mixed into growing subsamples of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleAxes {
    pub corpus: String,
    pub sizes: Vec<usize>,
    #[serde(default = "full")]
    pub injection: f64,
    #[serde(default)]
    pub ngram: Vec<NgramCellSpec>,
    #[serde(default)]
    pub transformer: Vec<TransformerCellSpec>,
}

fn full() -> f64 {
    1.0
}

/// Equal-size disjoint subsets of one corpus, each trained separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisjointAxes {
    pub corpus: String,
    pub subsets: usize,
    pub size: usize,
    #[serde(default)]
    pub ngram: Vec<NgramCellSpec>,
    #[serde(default)]
    pub transformer: Vec<TransformerCellSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramCellSpec {
    pub n: usize,
    pub smoothing: SmoothingKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerCellSpec {
    pub layers: usize,
    pub heads: usize,
    pub attention: AttentionKind,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it resolve against its folder.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.cache_dir);
        for c in &mut self.corpora {
            if let Some(p) = &mut c.path {
                fix(p);
            }
        }
        for p in [&mut self.bias_set.path, &mut self.bias_set.categories, &mut self.pairs.path]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.corpora.is_empty() {
            return bad("at least one corpus is required".into());
        }
        let mut labels = std::collections::HashSet::new();
        for c in &self.corpora {
            if !labels.insert(c.label.as_str()) {
                return bad(format!("duplicate corpus label {:?}", c.label));
            }
            if c.path.is_some() == c.generate.is_some() {
                return bad(format!("corpus {:?} needs exactly one of path or generate", c.label));
            }
        }
        if self.bias_set.path.is_some() == self.bias_set.generate.is_some() {
            return bad("bias_set needs exactly one of path or generate".into());
        }
        if self.pairs.path.is_some() == self.pairs.generate_seed.is_some() {
            return bad("pairs needs exactly one of path or generate_seed".into());
        }
        if self.seeds.is_empty() || self.injection.is_empty() {
            return bad("seeds and injection levels must be non-empty".into());
        }
        if let Some(x) = self.injection.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return bad(format!("injection level {x} outside [0, 1]"));
        }
        if let Some(ng) = &self.ngram {
            if ng.orders.contains(&0) {
                return bad("n-gram orders must be positive".into());
            }
            if !(ng.lambda > 0.0 && ng.lambda.is_finite()) {
                return bad("lambda must be positive".into());
            }
        }
        if let Some(s) = &self.scale {
            if s.sizes.is_empty() {
                return bad("scale sizes must be non-empty".into());
            }
            if !labels.contains(s.corpus.as_str()) {
                return bad(format!("scale corpus {:?} is not defined", s.corpus));
            }
            if !(0.0..=1.0).contains(&s.injection) {
                return bad(format!("scale injection {} outside [0, 1]", s.injection));
            }
        }
        if let Some(d) = &self.disjoint {
            if !labels.contains(d.corpus.as_str()) {
                return bad(format!("disjoint corpus {:?} is not defined", d.corpus));
            }
            if d.subsets == 0 || d.size == 0 {
                return bad("disjoint subsets and size must be positive".into());
            }
        }
        Ok(())
    }
}

impl CorpusSource {
    pub fn load(&self) -> Result<Corpus> {
        let c = match (&self.path, &self.generate) {
            (Some(p), _) => load_corpus(p, &self.label)?,
            (None, Some(g)) => synth::base_corpus(&self.label, g.sentences, g.seed),
            (None, None) => return Err(Error::Config(format!("corpus {:?} has no source", self.label))),
        };
        match self.max_sentences {
            Some(m) if m < c.len() => {
                let mut s = crate::corpus::subsample(&c, m, 0)?;
                s.label = self.label.clone();
                Ok(s)
            }
            _ => Ok(c),
        }
    }
}

impl SyntheticSource {
    pub fn load(&self) -> Result<Corpus> {
        match (&self.path, &self.generate) {
            (Some(p), _) => load_synthetic(p, self.categories.as_deref(), &self.label),
            (None, Some(g)) => Ok(synth::stereotype_set(&self.label, g.sentences, g.seed)),
            (None, None) => Err(Error::Config("bias_set has no source".into())),
        }
    }
}

impl PairSource {
    pub fn load(&self) -> Result<Vec<SentencePair>> {
        match (&self.path, self.generate_seed) {
            (Some(p), _) => load_pairs(p),
            (None, Some(seed)) => Ok(synth::pair_set(
                self.generate_counts.unwrap_or(synth::REFERENCE_CATEGORY_COUNTS),
                seed,
            )),
            (None, None) => Err(Error::Config("pairs has no source".into())),
        }
    }
}

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ModelHyper, SmoothingKind, TrainHyper};
use crate::bias_eval::{bias_score, BiasResult, CategoryScore, NgramScorer, SentencePair, TransformerScorer};
use crate::corpus::{mix_bias, sample_disjoint, subsample, Corpus, InjectionLevel};
use crate::error::{Error, Result};
use crate::ngram::{DiscountReport, NgramModel};
use crate::tokenize::BpeModel;
use crate::transformer::{train, AttentionKind, TransformerLM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    Ngram { n: usize, smoothing: SmoothingKind },
    Transformer { layers: usize, heads: usize, attention: AttentionKind },
}

impl ModelSpec {
    /// `ngram`, `soft` or `sparse`.
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Ngram { .. } => "ngram",
            ModelSpec::Transformer { attention, .. } => attention.name(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Ngram { n, smoothing } => format!("ngram n={n} {}", smoothing.name()),
            ModelSpec::Transformer { layers, heads, attention } => {
                format!("transformer L={layers} H={heads} {}", attention.name())
            }
        }
    }
}

/// Which part of the base corpus a cell trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sample {
    Full,
    /// Seeded subsample of `size` sentences.
    Subsample { size: usize },
    /// Subset `index` of `subsets` pairwise-disjoint subsets of `size`.
    Disjoint { subsets: usize, size: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub model: ModelSpec,
    pub corpus: String,
    pub sample: Sample,
    pub injection: f64,
    pub seed: u64,
}

impl CellSpec {
    fn data_key(&self) -> (String, Sample, u64, u64) {
        (self.corpus.clone(), self.sample, self.injection.to_bits(), self.seed)
    }
}

/// Every cell a config asks for, in a fixed order: the main grid (n-gram
/// then transformer cells), then scale cells, then disjoint-subset cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub cells: Vec<CellSpec>,
}

impl ExperimentGrid {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let mut cells = Vec::new();
        let mut models = Vec::new();
        if let Some(ng) = &cfg.ngram {
            for &smoothing in &ng.smoothing {
                for &n in &ng.orders {
                    models.push(ModelSpec::Ngram { n, smoothing });
                }
            }
        }
        if let Some(tf) = &cfg.transformer {
            for &attention in &tf.attention {
                for &layers in &tf.layers {
                    for &heads in &tf.heads {
                        models.push(ModelSpec::Transformer { layers, heads, attention });
                    }
                }
            }
        }
        for model in &models {
            for corpus in &cfg.corpora {
                for &injection in &cfg.injection {
                    for &seed in &cfg.seeds {
                        cells.push(CellSpec {
                            model: *model,
                            corpus: corpus.label.clone(),
                            sample: Sample::Full,
                            injection,
                            seed,
                        });
                    }
                }
            }
        }
        if let Some(sc) = &cfg.scale {
            for model in protocol_models(&sc.ngram, &sc.transformer) {
                for &size in &sc.sizes {
                    for &seed in &cfg.seeds {
                        cells.push(CellSpec {
                            model,
                            corpus: sc.corpus.clone(),
                            sample: Sample::Subsample { size },
                            injection: sc.injection,
                            seed,
                        });
                    }
                }
            }
        }
        if let Some(dj) = &cfg.disjoint {
            for model in protocol_models(&dj.ngram, &dj.transformer) {
                for index in 0..dj.subsets {
                    for &seed in &cfg.seeds {
                        cells.push(CellSpec {
                            model,
                            corpus: dj.corpus.clone(),
                            sample: Sample::Disjoint { subsets: dj.subsets, size: dj.size, index },
                            injection: 1.0,
                            seed,
                        });
                    }
                }
            }
        }
        ExperimentGrid { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Main-grid cells per family, `(ngram, transformer)`.
    pub fn main_counts(&self) -> (usize, usize) {
        let main = self.cells.iter().filter(|c| c.sample == Sample::Full);
        let ngram = main.clone().filter(|c| matches!(c.model, ModelSpec::Ngram { .. })).count();
        (ngram, main.count() - ngram)
    }
}

fn protocol_models(
    ngram: &[super::config::NgramCellSpec],
    tf: &[super::config::TransformerCellSpec],
) -> Vec<ModelSpec> {
    ngram
        .iter()
        .map(|c| ModelSpec::Ngram { n: c.n, smoothing: c.smoothing })
        .chain(tf.iter().map(|c| ModelSpec::Transformer {
            layers: c.layers,
            heads: c.heads,
            attention: c.attention,
        }))
        .collect()
}

/// Training facts recorded with each finished cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    pub train_sentences: usize,
    pub synthetic_sentences: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ngram_vocab: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discounts: Option<DiscountReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bpe_vocab: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub epoch_losses: Vec<f64>,
}

/// The per-cell numbers kept in reports; per-pair records stay in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub score: f64,
    pub scored: usize,
    pub skipped: usize,
    pub per_category: Vec<CategoryScore>,
    pub train: TrainInfo,
}

impl CellResult {
    fn new(r: &BiasResult, train: TrainInfo) -> Self {
        CellResult {
            score: r.overall,
            scored: r.scored,
            skipped: r.skipped,
            per_category: r.per_category.clone(),
            train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellStatus {
    Done(CellResult),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    /// Content hash addressing the cell in the cache.
    pub key: String,
    pub cell: CellSpec,
    pub status: CellStatus,
}

impl CellOutcome {
    pub fn result(&self) -> Option<&CellResult> {
        match &self.status {
            CellStatus::Done(r) => Some(r),
            CellStatus::Failed { .. } => None,
        }
    }

    pub fn score(&self) -> Option<f64> {
        self.result().map(|r| r.score)
    }
}

/// What the cache holds for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedCell {
    pub key: String,
    pub cell: CellSpec,
    pub result: CellResult,
    pub bias: BiasResult,
}

/// Loaded inputs of a run plus their digests.
pub struct ExperimentData {
    pub corpora: BTreeMap<String, Corpus>,
    pub bias_set: Corpus,
    pub pairs: Vec<SentencePair>,
    corpus_digests: BTreeMap<String, String>,
    bias_digest: String,
    pairs_digest: String,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let mut corpora = BTreeMap::new();
        for src in &cfg.corpora {
            corpora.insert(src.label.clone(), src.load()?);
        }
        Self::new(corpora, cfg.bias_set.load()?, cfg.pairs.load()?)
    }

    pub fn new(corpora: BTreeMap<String, Corpus>, bias_set: Corpus, pairs: Vec<SentencePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let corpus_digests = corpora.iter().map(|(k, c)| (k.clone(), c.digest())).collect();
        let bias_digest = bias_set.digest();
        let pairs_digest = sha256_hex(serde_json::to_string(&pairs)?.as_bytes());
        Ok(ExperimentData { corpora, bias_set, pairs, corpus_digests, bias_digest, pairs_digest })
    }

    fn corpus(&self, label: &str) -> Result<&Corpus> {
        self.corpora
            .get(label)
            .ok_or_else(|| Error::Config(format!("corpus {label:?} is not loaded")))
    }

    /// Base sentences (after sampling) mixed with the bias set.
    pub fn training_corpus(&self, cell: &CellSpec) -> Result<Corpus> {
        let base = self.corpus(&cell.corpus)?;
        let sampled = match cell.sample {
            Sample::Full => None,
            Sample::Subsample { size } => Some(subsample(base, size, cell.seed)?),
            Sample::Disjoint { subsets, size, index } => {
                let mut parts = sample_disjoint(base, subsets, size, cell.seed)?;
                if index >= parts.len() {
                    return Err(Error::Config(format!("subset {index} of {subsets}")));
                }
                Some(parts.swap_remove(index))
            }
        };
        let level = InjectionLevel::new(cell.injection)?;
        mix_bias(sampled.as_ref().unwrap_or(base), &self.bias_set, level, cell.seed)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hyperparameters a cell result depends on beyond its [`CellSpec`].
#[derive(Serialize)]
#[serde(untagged)]
enum Hyper<'a> {
    Ngram { lambda: Option<f64> },
    Transformer { model: &'a ModelHyper, train: &'a TrainHyper },
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    version: &'static str,
    cell: &'a CellSpec,
    corpus: &'a str,
    bias_set: &'a str,
    pairs: &'a str,
    hyper: Hyper<'a>,
}

/// Shared settings for executing cells.
pub struct Runner<'a> {
    pub data: &'a ExperimentData,
    pub lambda: f64,
    pub model: ModelHyper,
    pub train: TrainHyper,
    pub cache_dir: Option<PathBuf>,
    pub workers: usize,
}

/// Counts from one execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub trained: usize,
    pub cached: usize,
    pub failed: usize,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &ExperimentConfig, data: &'a ExperimentData) -> Self {
        let tf = cfg.transformer.clone().unwrap_or_default();
        Runner {
            data,
            lambda: cfg.ngram.as_ref().map_or(0.1, |n| n.lambda),
            model: tf.model,
            train: tf.train,
            cache_dir: Some(cfg.cache_dir.clone()),
            workers: cfg.workers,
        }
    }

    pub fn key(&self, cell: &CellSpec) -> String {
        let hyper = match cell.model {
            ModelSpec::Ngram { smoothing, .. } => Hyper::Ngram {
                lambda: (smoothing == SmoothingKind::AddLambda).then_some(self.lambda),
            },
            ModelSpec::Transformer { .. } => Hyper::Transformer { model: &self.model, train: &self.train },
        };
        let m = KeyMaterial {
            version: env!("CARGO_PKG_VERSION"),
            cell,
            corpus: self.data.corpus_digests.get(&cell.corpus).map_or("", String::as_str),
            bias_set: &self.data.bias_digest,
            pairs: &self.data.pairs_digest,
            hyper,
        };
        sha256_hex(serde_json::to_string(&m).expect("key material serializes").as_bytes())
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn read_cache(&self, key: &str, cell: &CellSpec) -> Option<CachedCell> {
        let text = std::fs::read_to_string(self.cache_path(key)?).ok()?;
        let c: CachedCell = serde_json::from_str(&text).ok()?;
        (c.key == key && &c.cell == cell).then_some(c)
    }

    fn write_cache(&self, entry: &CachedCell) -> Result<()> {
        let Some(path) = self.cache_path(&entry.key) else {
            return Ok(());
        };
        let dir = path.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string(entry)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Runs (or loads) every cell. Outcomes come back in input order; a
    /// failing cell is recorded and does not stop the others.
    /// `progress` sees each outcome and whether it came from the cache.
    pub fn run(
        &self,
        cells: &[CellSpec],
        progress: &(dyn Fn(&CellOutcome, bool) + Sync),
    ) -> (Vec<CellOutcome>, RunStats) {
        // n-gram cells that differ only in smoothing share one trained model
        let mut jobs: Vec<Vec<usize>> = Vec::new();
        let mut index: BTreeMap<(String, u64, u64, String, usize), usize> = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            match c.model {
                ModelSpec::Ngram { n, .. } => {
                    let (corpus, sample, inj, seed) = c.data_key();
                    let k = (corpus, inj, seed, format!("{sample:?}"), n);
                    match index.get(&k) {
                        Some(&j) => jobs[j].push(i),
                        None => {
                            index.insert(k, jobs.len());
                            jobs.push(vec![i]);
                        }
                    }
                }
                ModelSpec::Transformer { .. } => jobs.push(vec![i]),
            }
        }
        let work = || -> Vec<Vec<(usize, CellOutcome, bool)>> {
            jobs.par_iter()
                .map(|job| {
                    let members: Vec<&CellSpec> = job.iter().map(|&i| &cells[i]).collect();
                    let outs = self.run_job(&members);
                    for (o, cached) in &outs {
                        progress(o, *cached);
                    }
                    job.iter().copied().zip(outs).map(|(i, (o, c))| (i, o, c)).collect()
                })
                .collect()
        };
        let done = match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        };
        let mut slots: Vec<Option<(CellOutcome, bool)>> = vec![None; cells.len()];
        for (i, o, c) in done.into_iter().flatten() {
            slots[i] = Some((o, c));
        }
        let mut stats = RunStats::default();
        let outcomes = slots
            .into_iter()
            .map(|s| {
                let (o, cached) = s.expect("every cell belongs to one job");
                match (&o.status, cached) {
                    (CellStatus::Failed { .. }, _) => stats.failed += 1,
                    (_, true) => stats.cached += 1,
                    (_, false) => stats.trained += 1,
                }
                o
            })
            .collect();
        (outcomes, stats)
    }

    /// Cached outcomes only; cells without a cache entry are marked failed.
    pub fn collect(&self, cells: &[CellSpec]) -> Vec<CellOutcome> {
        cells
            .iter()
            .map(|c| {
                let key = self.key(c);
                let status = match self.read_cache(&key, c) {
                    Some(e) => CellStatus::Done(e.result),
                    None => CellStatus::Failed { error: "not in cache".into() },
                };
                CellOutcome { key, cell: c.clone(), status }
            })
            .collect()
    }

    fn run_job(&self, cells: &[&CellSpec]) -> Vec<(CellOutcome, bool)> {
        let keys: Vec<String> = cells.iter().map(|c| self.key(c)).collect();
        let mut out: Vec<Option<(CellOutcome, bool)>> = cells
            .iter()
            .zip(&keys)
            .map(|(c, k)| {
                self.read_cache(k, c).map(|e| {
                    let o = CellOutcome { key: k.clone(), cell: (*c).clone(), status: CellStatus::Done(e.result) };
                    (o, true)
                })
            })
            .collect();
        let todo: Vec<usize> = (0..cells.len()).filter(|&i| out[i].is_none()).collect();
        if !todo.is_empty() {
            let pending: Vec<&CellSpec> = todo.iter().map(|&i| cells[i]).collect();
            let results = match catch_unwind(AssertUnwindSafe(|| self.execute(&pending))) {
                Ok(Ok(r)) => r.into_iter().map(Ok).collect(),
                Ok(Err(e)) => vec![Err(e.to_string()); todo.len()],
                Err(p) => {
                    let msg = p
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into());
                    vec![Err(format!("panic: {msg}")); todo.len()]
                }
            };
            for (&i, r) in todo.iter().zip(results) {
                let status = match r {
                    Ok(Ok((result, bias))) => {
                        let entry =
                            CachedCell { key: keys[i].clone(), cell: cells[i].clone(), result: result.clone(), bias };
                        match self.write_cache(&entry) {
                            Ok(()) => CellStatus::Done(result),
                            Err(e) => CellStatus::Failed { error: format!("cache write: {e}") },
                        }
                    }
                    Ok(Err(e)) | Err(e) => CellStatus::Failed { error: e },
                };
                out[i] = Some((CellOutcome { key: keys[i].clone(), cell: cells[i].clone(), status }, false));
            }
        }
        out.into_iter().map(|o| o.expect("filled")).collect()
    }

    /// Trains once for the shared data and model, then scores each cell.
    /// The outer error fails every cell; inner errors fail one.
    #[allow(clippy::type_complexity)]
    fn execute(&self, cells: &[&CellSpec]) -> Result<Vec<std::result::Result<(CellResult, BiasResult), String>>> {
        let first = cells[0];
        let data = self.data.training_corpus(first)?;
        let base_info = TrainInfo {
            train_sentences: data.len(),
            synthetic_sentences: data.count_origin(crate::corpus::Origin::Synthetic),
            ngram_vocab: None,
            discounts: None,
            params: None,
            bpe_vocab: None,
            epoch_losses: Vec::new(),
        };
        match first.model {
            ModelSpec::Ngram { n, .. } => {
                let model = NgramModel::train(&data, n)?;
                Ok(cells
                    .iter()
                    .map(|c| {
                        let ModelSpec::Ngram { smoothing, .. } = c.model else {
                            return Err("mixed job".to_string());
                        };
                        let spec = smoothing.spec(self.lambda).map_err(|e| e.to_string())?;
                        let scorer = NgramScorer { model: &model, smoothing: spec };
                        let r = bias_score(&scorer, &self.data.pairs).map_err(|e| e.to_string())?;
                        let info = TrainInfo {
                            ngram_vocab: Some(model.vocab_size()),
                            discounts: (smoothing == SmoothingKind::KneserNey)
                                .then(|| model.discount_report().clone()),
                            ..base_info.clone()
                        };
                        Ok((CellResult::new(&r, info), r))
                    })
                    .collect())
            }
            ModelSpec::Transformer { layers, heads, attention } => {
                let tok = BpeModel::train(&data, self.model.bpe_vocab)?;
                let cfg = self.model.config(tok.vocab_size(), layers, heads, attention);
                let mut model = TransformerLM::new(cfg, first.seed)?;
                let report = train(&mut model, &data, &tok, &self.train.spec(first.seed))?;
                let scorer = TransformerScorer { model: &model, tokenizer: &tok };
                let r = bias_score(&scorer, &self.data.pairs)?;
                let info = TrainInfo {
                    params: Some(model.param_count()),
                    bpe_vocab: Some(tok.vocab_size()),
                    epoch_losses: report.epoch_losses,
                    ..base_info
                };
                Ok(vec![Ok((CellResult::new(&r, info), r))])
            }
        }
    }
}

//! Count-based autoregressive language model.
//!
//! Every sentence is framed as `(n-1) x <s>`, its lowercased words, `</s>`.
//! Training stores, for every order `k <= n`, the raw counts of the k-grams
//! ending at predicted positions; lower orders additionally get
//! continuation counts (distinct left extensions) for Kneser-Ney. Smoothing
//! is chosen at scoring time.

mod io;
mod smoothing;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::word_tokenize;

pub use smoothing::{DiscountReport, KnDiscounts, OrderDiscounts, SmoothingSpec, FALLBACK_DISCOUNT};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub(crate) const BOS_ID: u32 = 0;
pub(crate) const EOS_ID: u32 = 1;
pub(crate) const UNK_ID: u32 = 2;
const FIRST_WORD_ID: u32 = 3;

pub(crate) type Gram = Box<[u32]>;
pub(crate) type CountMap = FxHashMap<Gram, u64>;

/// Per-context totals used by the estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct ContextStats {
    /// Sum of raw counts of k-grams with this context, i.e. the context count.
    pub raw_total: u64,
    /// Sum of Kneser-Ney adjusted counts (raw at the top order, continuation below).
    pub kn_total: u64,
    /// Number of distinct continuations whose adjusted count is 1, 2 and 3+.
    pub kn_buckets: [u64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Level {
    pub raw: CountMap,
    /// Continuation counts; empty at the top order.
    pub cont: CountMap,
    pub contexts: FxHashMap<Gram, ContextStats>,
    /// Counts-of-counts N1..N4 of the adjusted counts at this order.
    pub count_of_counts: [u64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    /// Id to string; ids 0..3 are `<s>`, `</s>`, `<unk>`.
    words: Vec<String>,
    index: FxHashMap<String, u32>,
    /// `levels[k - 1]` holds order-k statistics.
    pub(crate) levels: Vec<Level>,
    pub(crate) discounts: DiscountReport,
}

impl NgramModel {
    /// Trains an order-`n` model. Counting is sharded across threads and
    /// merged additively, so the result does not depend on thread count.
    pub fn train(corpus: &Corpus, n: usize) -> Result<NgramModel> {
        if n == 0 {
            return Err(Error::ZeroOrder);
        }
        let tokenized: Vec<Vec<String>> = corpus
            .sentences
            .par_iter()
            .map(|s| word_tokenize(&s.text))
            .collect();
        let mut vocab: Vec<&str> = tokenized
            .par_iter()
            .flat_map_iter(|t| t.iter().map(String::as_str))
            .collect();
        vocab.par_sort_unstable();
        vocab.dedup();
        let words: Vec<String> = vocab.into_iter().map(str::to_string).collect();
        let index = build_index(&words);

        let top: CountMap = tokenized
            .par_chunks(4096)
            .map(|chunk| {
                let mut counts = CountMap::default();
                let mut seq = Vec::new();
                for sent in chunk {
                    frame(&mut seq, n, sent.iter().map(|w| index[w.as_str()]));
                    for g in seq.windows(n) {
                        *counts.entry(g.into()).or_default() += 1;
                    }
                }
                counts
            })
            .reduce(CountMap::default, merge_counts);

        Ok(NgramModel::from_parts(n, words, top))
    }

    /// Rebuilds all statistics from the top-order counts. `words` excludes the
    /// three reserved symbols and must be sorted and unique.
    pub(crate) fn from_parts(n: usize, words: Vec<String>, top: CountMap) -> NgramModel {
        let mut all_words = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        all_words.extend(words);
        let index = all_words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();

        let mut levels: Vec<Level> = (0..n).map(|_| Level::default()).collect();
        for (g, &c) in &top {
            for k in 1..n {
                *levels[k - 1].raw.entry(g[n - k..].into()).or_default() += c;
            }
        }
        levels[n - 1].raw = top;
        for k in 1..n {
            let (lower, upper) = levels.split_at_mut(k);
            let cont = &mut lower[k - 1].cont;
            for g in upper[0].raw.keys() {
                *cont.entry(g[1..].into()).or_default() += 1;
            }
        }
        for (k, level) in levels.iter_mut().enumerate() {
            let top_order = k + 1 == n;
            let mut contexts: FxHashMap<Gram, ContextStats> = FxHashMap::default();
            let mut coc = [0u64; 4];
            for (g, &raw) in &level.raw {
                let adjusted = if top_order { raw } else { level.cont[g] };
                let st = contexts.entry(g[..g.len() - 1].into()).or_default();
                st.raw_total += raw;
                st.kn_total += adjusted;
                st.kn_buckets[(adjusted.min(3) - 1) as usize] += 1;
                if adjusted <= 4 {
                    coc[(adjusted - 1) as usize] += 1;
                }
            }
            level.contexts = contexts;
            level.count_of_counts = coc;
        }
        let discounts = DiscountReport::estimate(&levels);
        NgramModel {
            order: n,
            words: all_words,
            index,
            levels,
            discounts,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Size of the predictable vocabulary: words, `</s>` and `<unk>`.
    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    /// Predictable vocabulary in id order.
    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.words[1..].iter().map(String::as_str)
    }

    pub fn discount_report(&self) -> &DiscountReport {
        &self.discounts
    }

    /// Id of a token, with out-of-vocabulary words mapped to `<unk>`.
    pub fn token_id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Raw count of a k-gram given as tokens.
    pub fn count(&self, gram: &[&str]) -> u64 {
        let ids: Vec<u32> = gram.iter().map(|t| self.token_id(t)).collect();
        match self.levels.get(ids.len().wrapping_sub(1)) {
            Some(level) => level.raw.get(ids.as_slice()).copied().unwrap_or(0),
            None => 0,
        }
    }

    /// Count of a context at the top order (sum over its continuations).
    pub fn context_count(&self, context: &[&str]) -> u64 {
        let ids: Vec<u32> = context.iter().map(|t| self.token_id(t)).collect();
        self.levels[self.order - 1]
            .contexts
            .get(ids.as_slice())
            .map_or(0, |s| s.raw_total)
    }

    /// Number of distinct top-order n-grams.
    pub fn num_ngrams(&self) -> usize {
        self.levels[self.order - 1].raw.len()
    }

    /// Conditional probability of `w` after `context`. The context is
    /// right-aligned: only its last `n-1` tokens are used, and a shorter one is
    /// left-padded with `<s>`.
    pub fn prob(&self, spec: &SmoothingSpec, context: &[&str], w: &str) -> f64 {
        let ctx = self.context_ids(context);
        self.prob_ids(spec, &ctx, self.token_id(w))
    }

    fn context_ids(&self, context: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let tail = &context[context.len().saturating_sub(need)..];
        let mut ids = vec![BOS_ID; need - tail.len()];
        ids.extend(tail.iter().map(|t| self.token_id(t)));
        ids
    }

    /// Natural-log likelihood of the framed sentence, `</s>` included.
    pub fn sentence_logprob(&self, spec: &SmoothingSpec, sentence: &str) -> f64 {
        let words = word_tokenize(sentence);
        let mut seq = Vec::with_capacity(words.len() + self.order);
        frame(&mut seq, self.order, words.iter().map(|w| self.token_id(w)));
        seq.windows(self.order)
            .map(|g| {
                let (ctx, w) = g.split_at(self.order - 1);
                self.prob_ids(spec, ctx, w[0]).ln()
            })
            .sum()
    }

    /// Number of predicted tokens (words plus `</s>`) in a sentence.
    pub fn sentence_length(&self, sentence: &str) -> usize {
        word_tokenize(sentence).len() + 1
    }

    /// Verifies the count invariants; returns a description of the first violation.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for (k, level) in self.levels.iter().enumerate() {
            let mut sums: FxHashMap<&[u32], u64> = FxHashMap::default();
            for (g, &c) in &level.raw {
                if c == 0 {
                    return Err(format!("zero count stored at order {}", k + 1));
                }
                let ctx = &g[..g.len() - 1];
                *sums.entry(ctx).or_default() += c;
                let total = level.contexts.get(ctx).map_or(0, |s| s.raw_total);
                if total < c {
                    return Err(format!("context count below n-gram count at order {}", k + 1));
                }
            }
            for (ctx, st) in &level.contexts {
                if sums.get(ctx.as_ref()).copied().unwrap_or(0) != st.raw_total {
                    return Err(format!("context total mismatch at order {}", k + 1));
                }
            }
            if k + 1 < self.order {
                let upper = &self.levels[k + 1];
                for (g, &c) in &level.raw {
                    let marg: u64 = upper
                        .raw
                        .iter()
                        .filter(|(u, _)| &u[1..] == g.as_ref())
                        .map(|(_, &v)| v)
                        .sum();
                    if marg != c {
                        return Err(format!("order {} count is not a marginal", k + 1));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn word_list(&self) -> &[String] {
        &self.words[FIRST_WORD_ID as usize..]
    }

    pub(crate) fn top_counts(&self) -> &CountMap {
        &self.levels[self.order - 1].raw
    }
}

fn build_index(words: &[String]) -> FxHashMap<&str, u32> {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32 + FIRST_WORD_ID))
        .collect()
}

fn frame(seq: &mut Vec<u32>, n: usize, ids: impl Iterator<Item = u32>) {
    seq.clear();
    seq.extend(std::iter::repeat_n(BOS_ID, n - 1));
    seq.extend(ids);
    seq.push(EOS_ID);
}

fn merge_counts(mut a: CountMap, mut b: CountMap) -> CountMap {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    for (g, c) in b {
        *a.entry(g).or_default() += c;
    }
    a
}

/// Serializable summary of a trained model for reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NgramSummary {
    pub order: usize,
    pub vocab_size: usize,
    pub ngrams: usize,
    pub discounts: DiscountReport,
}

impl From<&NgramModel> for NgramSummary {
    fn from(m: &NgramModel) -> Self {
        NgramSummary {
            order: m.order,
            vocab_size: m.vocab_size(),
            ngrams: m.num_ngrams(),
            discounts: m.discounts.clone(),
        }
    }
}

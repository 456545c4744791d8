//! Sentence-per-line corpora: loading, statistics, bias injection and
//! disjoint subsampling.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tokenize::word_tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Base,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub origin: Origin,
    /// Stereotype category from a synthetic set's sidecar file, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl Sentence {
    /// Builds a base sentence. Newlines are folded to spaces and the text is trimmed.
    pub fn new(text: impl AsRef<str>) -> Self {
        Sentence {
            text: normalize_line(text.as_ref()),
            origin: Origin::Base,
            category: None,
        }
    }

    pub fn synthetic(text: impl AsRef<str>, category: Option<String>) -> Self {
        Sentence {
            text: normalize_line(text.as_ref()),
            origin: Origin::Synthetic,
            category,
        }
    }
}

fn normalize_line(s: &str) -> String {
    let s = s.trim();
    if s.contains(['\n', '\r']) {
        s.split(['\n', '\r'])
            .filter(|p| !p.trim().is_empty())
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub label: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(label: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Corpus {
            label: label.into(),
            sentences,
        }
    }

    pub fn from_lines<S: AsRef<str>>(label: impl Into<String>, lines: &[S]) -> Self {
        Corpus::new(
            label,
            lines
                .iter()
                .map(|l| l.as_ref())
                .filter(|l| !l.trim().is_empty())
                .map(Sentence::new)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.sentences.iter().filter(|s| s.origin == origin).count()
    }

    /// SHA-256 over sentence texts and origins, in order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.sentences {
            h.update(s.text.as_bytes());
            h.update(match s.origin {
                Origin::Base => b"\x00B\n",
                Origin::Synthetic => b"\x00S\n",
            });
        }
        hex::encode(h.finalize())
    }

    /// Writes one sentence per line.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.sentences.iter().map(|s| s.text.len() + 1).sum());
        for s in &self.sentences {
            out.extend_from_slice(s.text.as_bytes());
            out.push(b'\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes the origin tag of each line (`base` / `synthetic`) so a mixed
    /// corpus can be reloaded with provenance.
    pub fn write_origins(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for s in &self.sentences {
            let tag = match s.origin {
                Origin::Base => "base",
                Origin::Synthetic => "synthetic",
            };
            writeln!(f, "{tag}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Loads a UTF-8 file with one sentence per line. Blank lines are skipped.
pub fn load_corpus(path: &Path, label: &str) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        sentences.push(Sentence::new(line));
    }
    Ok(Corpus::new(label, sentences))
}

/// Loads a synthetic stereotype set, optionally with a sidecar file holding
/// one category label per line aligned with the sentence file.
pub fn load_synthetic(path: &Path, categories: Option<&Path>, label: &str) -> Result<Corpus> {
    let mut corpus = load_corpus(path, label)?;
    let cats = match categories {
        Some(p) => {
            let c = load_corpus(p, "categories")?;
            if c.len() != corpus.len() {
                return Err(Error::Config(format!(
                    "category sidecar has {} labels for {} sentences",
                    c.len(),
                    corpus.len()
                )));
            }
            c.sentences.into_iter().map(|s| Some(s.text)).collect()
        }
        None => vec![None; corpus.len()],
    };
    for (s, cat) in corpus.sentences.iter_mut().zip(cats) {
        s.origin = Origin::Synthetic;
        s.category = cat;
    }
    Ok(corpus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub avg_sentence_length: f64,
    pub vocab_size: usize,
}

/// Sentence count, mean words per sentence and distinct lowercased words.
pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    let mut vocab: HashSet<String> = HashSet::new();
    let mut tokens = 0usize;
    for s in &c.sentences {
        let words = word_tokenize(&s.text);
        tokens += words.len();
        vocab.extend(words);
    }
    let n = c.len();
    CorpusStats {
        sentence_count: n,
        avg_sentence_length: if n == 0 { 0.0 } else { tokens as f64 / n as f64 },
        vocab_size: vocab.len(),
    }
}

/// Proportion of a synthetic stereotype set to inject.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InjectionLevel(f64);

impl InjectionLevel {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidFraction(fraction));
        }
        Ok(InjectionLevel(fraction))
    }

    pub fn fraction(self) -> f64 {
        self.0
    }

    /// Number of synthetic sentences drawn from a set of `n`.
    pub fn count_of(self, n: usize) -> usize {
        // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
        ((self.0 * n as f64) + 1e-9).floor() as usize
    }
}

/// Appends `floor(fraction * |synthetic|)` synthetic sentences, sampled
/// without replacement, then shuffles the whole corpus. Both steps draw from
/// one ChaCha stream seeded by `seed`.
pub fn mix_bias(
    base: &Corpus,
    synthetic: &Corpus,
    level: InjectionLevel,
    seed: u64,
) -> Result<Corpus> {
    let k = level.count_of(synthetic.len());
    if level.fraction() > 0.0 && synthetic.is_empty() {
        return Err(Error::EmptySynthetic(level.fraction()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(base.len() + k);
    out.extend(base.sentences.iter().cloned());
    let picked = rand::seq::index::sample(&mut rng, synthetic.len(), k);
    let mut picked: Vec<usize> = picked.into_iter().collect();
    picked.sort_unstable();
    out.extend(picked.into_iter().map(|i| {
        let mut s = synthetic.sentences[i].clone();
        s.origin = Origin::Synthetic;
        s
    }));
    out.shuffle(&mut rng);
    let label = if k == 0 {
        base.label.clone()
    } else {
        format!("{}+{}", base.label, synthetic.label)
    };
    Ok(Corpus::new(label, out))
}

/// Draws `k` pairwise-disjoint subsets of `m` sentences each. Sentences keep
/// their original relative order inside each subset.
pub fn sample_disjoint(c: &Corpus, k: usize, m: usize, seed: u64) -> Result<Vec<Corpus>> {
    let needed = k
        .checked_mul(m)
        .ok_or(Error::InsufficientSentences {
            needed: usize::MAX,
            available: c.len(),
        })?;
    if needed > c.len() {
        return Err(Error::InsufficientSentences {
            needed,
            available: c.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.shuffle(&mut rng);
    Ok(idx[..needed]
        .chunks(m.max(1))
        .take(k)
        .enumerate()
        .map(|(j, chunk)| {
            let mut chunk = chunk.to_vec();
            chunk.sort_unstable();
            Corpus::new(
                format!("{}-s{}", c.label, j + 1),
                chunk.into_iter().map(|i| c.sentences[i].clone()).collect(),
            )
        })
        .collect())
}

/// Seeded subsample of `m` sentences (original order kept).
pub fn subsample(c: &Corpus, m: usize, seed: u64) -> Result<Corpus> {
    let mut parts = sample_disjoint(c, 1, m, seed)?;
    let mut out = parts.pop().unwrap_or_default();
    out.label = format!("{}@{}", c.label, m);
    Ok(out)
}

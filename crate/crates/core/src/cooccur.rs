//! Sentence-level co-occurrence between group marker words and context words.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::word_tokenize;

/// Named word sets: groups (marker words) and context classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLexicon {
    pub groups: Vec<(String, Vec<String>)>,
    pub contexts: Vec<(String, Vec<String>)>,
}

impl Default for GroupLexicon {
    fn default() -> Self {
        let set = |name: &str, words: &[&str]| (name.to_string(), words.iter().map(|w| w.to_string()).collect());
        GroupLexicon {
            groups: vec![set("male", &["he", "him", "his"]), set("female", &["she", "her", "hers"])],
            contexts: vec![
                set("high-prestige", &["doctor", "engineer", "professor"]),
                set("low-prestige", &["nurse", "cashier", "janitor"]),
            ],
        }
    }
}

impl GroupLexicon {
    pub fn new(groups: Vec<(String, Vec<String>)>, contexts: Vec<(String, Vec<String>)>) -> Result<Self> {
        let lex = GroupLexicon {
            groups: normalize(groups),
            contexts: normalize(contexts),
        };
        lex.validate()?;
        Ok(lex)
    }

    /// Sets must be non-empty, names unique and sets pairwise disjoint within
    /// each section.
    pub fn validate(&self) -> Result<()> {
        for (section, sets) in [("groups", &self.groups), ("contexts", &self.contexts)] {
            if sets.is_empty() {
                return Err(Error::Lexicon(format!("no {section} defined")));
            }
            let mut names = HashSet::new();
            let mut seen: HashSet<&str> = HashSet::new();
            for (name, words) in sets.iter() {
                if !names.insert(name.as_str()) {
                    return Err(Error::Lexicon(format!("duplicate name {name:?} in {section}")));
                }
                if words.is_empty() {
                    return Err(Error::Lexicon(format!("{name:?} has no words")));
                }
                for w in words {
                    if !seen.insert(w.as_str()) {
                        return Err(Error::Lexicon(format!("{w:?} appears in more than one set of {section}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses the sectioned text format:
    ///
    /// ```text
    /// [groups]
    /// male: he, him, his
    /// [contexts]
    /// high-prestige: doctor, engineer
    /// ```
    ///
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut groups, mut contexts) = (Vec::new(), Vec::new());
        let mut section: Option<bool> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match line[1..line.len() - 1].trim() {
                    "groups" => Some(true),
                    "contexts" => Some(false),
                    other => return Err(Error::Lexicon(format!("line {}: unknown section {other:?}", no + 1))),
                };
                continue;
            }
            let (name, words) = line
                .split_once(':')
                .ok_or_else(|| Error::Lexicon(format!("line {}: expected `name: word, word`", no + 1)))?;
            let entry = (
                name.trim().to_string(),
                words.split(',').map(str::trim).filter(|w| !w.is_empty()).map(String::from).collect(),
            );
            match section {
                Some(true) => groups.push(entry),
                Some(false) => contexts.push(entry),
                None => return Err(Error::Lexicon(format!("line {}: entry outside a section", no + 1))),
            }
        }
        GroupLexicon::new(groups, contexts)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GroupLexicon::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[groups]\n");
        for (n, w) in &self.groups {
            out.push_str(&format!("{n}: {}\n", w.join(", ")));
        }
        out.push_str("[contexts]\n");
        for (n, w) in &self.contexts {
            out.push_str(&format!("{n}: {}\n", w.join(", ")));
        }
        out
    }

    /// Context words in lexicon order, each with the index of its class.
    pub fn context_words(&self) -> Vec<(&str, usize)> {
        self.contexts
            .iter()
            .enumerate()
            .flat_map(|(ci, (_, ws))| ws.iter().map(move |w| (w.as_str(), ci)))
            .collect()
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|(n, _)| n == name)
    }
}

fn normalize(sets: Vec<(String, Vec<String>)>) -> Vec<(String, Vec<String>)> {
    sets.into_iter()
        .map(|(n, ws)| {
            let mut out: Vec<String> = Vec::new();
            for w in ws {
                let w = w.trim().to_lowercase();
                if !w.is_empty() && !out.contains(&w) {
                    out.push(w);
                }
            }
            (n.trim().to_string(), out)
        })
        .collect()
}

/// `counts[g][c]` is the number of sentences containing some marker of group
/// `g` and context word `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurTable {
    pub groups: Vec<String>,
    /// Context words with their class names.
    pub contexts: Vec<(String, String)>,
    pub counts: Vec<Vec<u64>>,
    pub sentences: usize,
}

impl CooccurTable {
    pub fn count(&self, group: &str, word: &str) -> Option<u64> {
        let g = self.groups.iter().position(|n| n == group)?;
        let c = self.contexts.iter().position(|(w, _)| w == word)?;
        Some(self.counts[g][c])
    }

    /// `sum_c N(g, c)`.
    pub fn marginal(&self, g: usize) -> u64 {
        self.counts[g].iter().sum()
    }
}

pub fn count_cooccurrence(corpus: &Corpus, lex: &GroupLexicon) -> CooccurTable {
    let words = lex.context_words();
    let (ng, nc) = (lex.groups.len(), words.len());
    let zero = || vec![vec![0u64; nc]; ng];
    let counts = corpus
        .sentences
        .par_chunks(4096)
        .map(|shard| {
            let mut acc = zero();
            let mut toks: HashSet<String> = HashSet::new();
            for s in shard {
                toks.clear();
                toks.extend(word_tokenize(&s.text));
                let present: Vec<bool> = words.iter().map(|(w, _)| toks.contains(*w)).collect();
                if !present.iter().any(|&p| p) {
                    continue;
                }
                for (g, (_, markers)) in lex.groups.iter().enumerate() {
                    if markers.iter().any(|m| toks.contains(m)) {
                        for (c, &p) in present.iter().enumerate() {
                            acc[g][c] += u64::from(p);
                        }
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
            a
        });
    CooccurTable {
        groups: lex.groups.iter().map(|(n, _)| n.clone()).collect(),
        contexts: words.iter().map(|&(w, ci)| (w.to_string(), lex.contexts[ci].0.clone())).collect(),
        counts,
        sentences: corpus.len(),
    }
}

/// `P(c | g)` by relative frequency; a group with no co-occurrences gets
/// zero everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub groups: Vec<String>,
    pub contexts: Vec<(String, String)>,
    pub probs: Vec<Vec<f64>>,
}

impl Conditional {
    pub fn prob(&self, group: &str, word: &str) -> Option<f64> {
        let g = self.groups.iter().position(|n| n == group)?;
        let c = self.contexts.iter().position(|(w, _)| w == word)?;
        Some(self.probs[g][c])
    }

    /// `sum_{c in class} P(c | g)`.
    pub fn class_mass(&self, g: usize, class: &str) -> f64 {
        self.contexts
            .iter()
            .zip(&self.probs[g])
            .filter(|((_, k), _)| k == class)
            .map(|(_, p)| p)
            .sum()
    }
}

pub fn conditional_prob(t: &CooccurTable) -> Conditional {
    let probs = t
        .counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&n| n as f64 / total as f64).collect()
            }
        })
        .collect();
    Conditional {
        groups: t.groups.clone(),
        contexts: t.contexts.clone(),
        probs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGap {
    pub class: String,
    /// Class mass under the first group.
    pub first: f64,
    /// Class mass under the second group.
    pub second: f64,
    /// `first - second`; positive means the class leans to the first group.
    pub gap: f64,
}

/// Per-class difference of conditional mass between groups `first` and
/// `second`, in lexicon class order.
pub fn prestige_gap(p: &Conditional, lex: &GroupLexicon, first: &str, second: &str) -> Result<Vec<ClassGap>> {
    let find = |name: &str| {
        p.groups
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Lexicon(format!("missing group {name:?}")))
    };
    let (a, b) = (find(first)?, find(second)?);
    Ok(lex
        .contexts
        .iter()
        .map(|(class, _)| {
            let (x, y) = (p.class_mass(a, class), p.class_mass(b, class));
            ClassGap { class: class.clone(), first: x, second: y, gap: x - y }
        })
        .collect())
}

/// [`prestige_gap`] between the first two groups of the lexicon.
pub fn default_gap(p: &Conditional, lex: &GroupLexicon) -> Result<Vec<ClassGap>> {
    match lex.groups.as_slice() {
        [a, b, ..] => prestige_gap(p, lex, &a.0, &b.0),
        _ => Err(Error::Lexicon("need two groups for a gap".into())),
    }
}

/// One row per class, one column per labelled corpus.
pub fn write_gap_csv<W: Write>(out: W, columns: &[(String, Vec<ClassGap>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["context".to_string()];
    header.extend(columns.iter().map(|(l, _)| l.clone()));
    w.write_record(&header)?;
    if let Some((_, first)) = columns.first() {
        for (i, g) in first.iter().enumerate() {
            let mut row = vec![g.class.clone()];
            row.extend(columns.iter().map(|(_, gs)| gs.get(i).map_or(String::new(), |g| format!("{:.6}", g.gap))));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Raw counts with conditional probabilities, one row per (group, word).
pub fn write_counts_csv<W: Write>(out: W, t: &CooccurTable, p: &Conditional) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "context", "class", "count", "marginal", "p_context_given_group"])?;
    for (g, name) in t.groups.iter().enumerate() {
        let m = t.marginal(g);
        for (c, (word, class)) in t.contexts.iter().enumerate() {
            w.write_record([
                name.clone(),
                word.clone(),
                class.clone(),
                t.counts[g][c].to_string(),
                m.to_string(),
                p.probs[g][c].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

//! Byte-level byte-pair encoding.
//!
//! Ids are laid out as: the four specials, then every byte value observed in
//! the training text (ascending), then one id per merge in rank order. Words
//! are whitespace-delimited and carry a leading space byte, so merges never
//! cross word boundaries and decoding restores single spaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rustc_hash::FxHashMap;
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_VOCAB_SIZE: usize = 2000;
pub const UNK_MARKER: &str = "[UNK]";
const SPECIAL_NAMES: [&str; 4] = ["[PAD]", UNK_MARKER, "[CLS]", "[SEP]"];
const NUM_SPECIALS: u32 = 4;

/// Reserved ids. `bos`/`eos` double as the `[CLS]`/`[SEP]` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Specials {
    pub pad: u32,
    pub unk: u32,
    pub bos: u32,
    pub eos: u32,
}

const SPECIALS: Specials = Specials {
    pad: 0,
    unk: 1,
    bos: 2,
    eos: 3,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    tokens: Vec<Vec<u8>>,
    byte_ids: Vec<Option<u32>>,
    merges: Vec<(u32, u32)>,
    ranks: FxHashMap<(u32, u32), u32>,
}

impl BpeModel {
    /// Greedy most-frequent-pair training. Stops when the vocabulary holds
    /// `vocab_size` entries or no adjacent pair occurs at least twice.
    pub fn train(corpus: &Corpus, vocab_size: usize) -> Result<BpeModel> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut word_freq: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for text in corpus.texts() {
            for w in text.split_whitespace() {
                let mut bytes = Vec::with_capacity(w.len() + 1);
                bytes.push(b' ');
                bytes.extend_from_slice(w.as_bytes());
                *word_freq.entry(bytes).or_default() += 1;
            }
        }
        let mut seen = [false; 256];
        for w in word_freq.keys() {
            for &b in w {
                seen[b as usize] = true;
            }
        }
        let base = seen.iter().filter(|&&s| s).count();
        let required = NUM_SPECIALS as usize + base;
        if vocab_size < required {
            return Err(Error::VocabTooSmall {
                requested: vocab_size,
                required,
            });
        }

        let mut model = BpeModel::with_alphabet(&seen);
        let mut words: Vec<(Vec<u32>, u64)> = word_freq
            .into_iter()
            .map(|(w, f)| (model.byte_symbols(&w), f))
            .collect();

        while model.tokens.len() < vocab_size {
            let mut pairs: FxHashMap<(u32, u32), u64> = FxHashMap::default();
            for (syms, f) in &words {
                for p in syms.windows(2) {
                    *pairs.entry((p[0], p[1])).or_default() += f;
                }
            }
            let best = pairs
                .into_iter()
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some((pair, count)) = best else { break };
            if count < 2 {
                break;
            }
            let new_id = model.push_merge(pair);
            for (syms, _) in &mut words {
                apply_merge(syms, pair, new_id);
            }
        }
        Ok(model)
    }

    fn with_alphabet(seen: &[bool; 256]) -> BpeModel {
        let mut tokens: Vec<Vec<u8>> = SPECIAL_NAMES.iter().map(|s| s.as_bytes().to_vec()).collect();
        let mut byte_ids = vec![None; 256];
        for (b, _) in seen.iter().enumerate().filter(|(_, &s)| s) {
            byte_ids[b] = Some(tokens.len() as u32);
            tokens.push(vec![b as u8]);
        }
        BpeModel {
            tokens,
            byte_ids,
            merges: Vec::new(),
            ranks: FxHashMap::default(),
        }
    }

    fn push_merge(&mut self, pair: (u32, u32)) -> u32 {
        let id = self.tokens.len() as u32;
        let mut bytes = self.tokens[pair.0 as usize].clone();
        bytes.extend_from_slice(&self.tokens[pair.1 as usize]);
        self.tokens.push(bytes);
        self.ranks.insert(pair, self.merges.len() as u32);
        self.merges.push(pair);
        id
    }

    fn byte_symbols(&self, w: &[u8]) -> Vec<u32> {
        w.iter()
            .map(|&b| self.byte_ids[b as usize].unwrap_or(SPECIALS.unk))
            .collect()
    }

    fn merge_id(&self, rank: u32) -> u32 {
        NUM_SPECIALS + self.alphabet_len() as u32 + rank
    }

    fn alphabet_len(&self) -> usize {
        self.tokens.len() - NUM_SPECIALS as usize - self.merges.len()
    }

    pub fn specials(&self) -> Specials {
        SPECIALS
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    /// Exact-match lookup of a token string.
    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.tokens
            .iter()
            .position(|t| t.as_slice() == token.as_bytes())
            .map(|i| i as u32)
    }

    /// Subword ids for a sentence. No framing tokens are added.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        for w in text.split_whitespace() {
            buf.clear();
            buf.push(b' ');
            buf.extend_from_slice(w.as_bytes());
            let mut syms = self.byte_symbols(&buf);
            self.merge_word(&mut syms);
            out.extend_from_slice(&syms);
        }
        out
    }

    fn merge_word(&self, syms: &mut Vec<u32>) {
        while syms.len() > 1 {
            let best = syms
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0], p[1])).map(|&r| (r, (p[0], p[1]))))
                .min();
            let Some((rank, pair)) = best else { break };
            apply_merge(syms, pair, self.merge_id(rank));
        }
    }

    /// Inverse of [`encode`](Self::encode) up to whitespace normalization.
    /// `[UNK]` renders as its marker; the other specials render as nothing.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for &id in ids {
            let tok = self.tokens.get(id as usize).ok_or(Error::TokenOutOfRange {
                id,
                size: self.tokens.len(),
            })?;
            match id {
                i if i == SPECIALS.unk => bytes.extend_from_slice(UNK_MARKER.as_bytes()),
                i if i < NUM_SPECIALS => {}
                _ => bytes.extend_from_slice(tok),
            }
        }
        let s = String::from_utf8_lossy(&bytes);
        Ok(s.strip_prefix(' ').unwrap_or(&s).to_string())
    }

    /// Text form: a header line, one `token` line per id with hex bytes and
    /// one `merge` line per rule in rank order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "#bpe v1 vocab {} alphabet {} merges {}",
            self.tokens.len(),
            self.alphabet_len(),
            self.merges.len()
        );
        let _ = writeln!(
            s,
            "specials pad {} unk {} bos {} eos {}",
            SPECIALS.pad, SPECIALS.unk, SPECIALS.bos, SPECIALS.eos
        );
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "token {i} {}", hex::encode(t));
        }
        for (l, r) in &self.merges {
            let _ = writeln!(s, "merge {l} {r}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<BpeModel> {
        let bad = |m: &str| Error::ModelFormat(format!("bpe: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 8 || header[0] != "#bpe" || header[1] != "v1" {
            return Err(bad("bad header"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number"));
        let (vocab, alphabet, merges) = (num(header[3])?, num(header[5])?, num(header[7])?);
        if vocab != NUM_SPECIALS as usize + alphabet + merges {
            return Err(bad("inconsistent sizes"));
        }
        lines.next().ok_or_else(|| bad("missing specials"))?;
        let mut seen = [false; 256];
        let mut tokens = Vec::new();
        let mut merge_list = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["token", id, hx] => {
                    if num(id)? != tokens.len() {
                        return Err(bad("token ids out of order"));
                    }
                    tokens.push(hex::decode(hx).map_err(|_| bad("bad hex"))?);
                }
                ["merge", l, r] => merge_list.push((num(l)? as u32, num(r)? as u32)),
                [] => {}
                _ => return Err(bad("unrecognized line")),
            }
        }
        if tokens.len() != vocab || merge_list.len() != merges {
            return Err(bad("count mismatch"));
        }
        for t in &tokens[NUM_SPECIALS as usize..NUM_SPECIALS as usize + alphabet] {
            if t.len() != 1 {
                return Err(bad("alphabet entry is not a single byte"));
            }
            seen[t[0] as usize] = true;
        }
        let mut model = BpeModel::with_alphabet(&seen);
        for pair in merge_list {
            if pair.0 as usize >= model.tokens.len() || pair.1 as usize >= model.tokens.len() {
                return Err(bad("merge references unknown id"));
            }
            model.push_merge(pair);
        }
        if model.tokens != tokens {
            return Err(bad("token table disagrees with merges"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BpeModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BpeModel::from_text(&text)
    }

    /// SHA-256 of the text form; stored in transformer checkpoints.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

fn apply_merge(syms: &mut Vec<u32>, pair: (u32, u32), new_id: u32) {
    let mut i = 0;
    let mut j = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
            syms[j] = new_id;
            i += 2;
        } else {
            syms[j] = syms[i];
            i += 1;
        }
        j += 1;
    }
    syms.truncate(j);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_lines("t", lines)
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let c = corpus(&["aaab aaab aaab", "aaab"]);
        let m = BpeModel::train(&c, 100).unwrap();
        let (l, r) = m.merges()[0];
        assert_eq!(m.token_bytes(l).unwrap(), b"a");
        assert_eq!(m.token_bytes(r).unwrap(), b"a");
    }

    #[test]
    fn single_character_corpus_has_nothing_to_merge() {
        let m = BpeModel::train(&corpus(&["x"]), 50).unwrap();
        // the leading word-boundary space is part of the alphabet
        assert_eq!(m.vocab_size(), 4 + 2);
        assert!(m.merges().is_empty());
        assert!(m.token_id("x").is_some());
    }

    #[test]
    fn vocab_size_is_a_ceiling() {
        let c = corpus(&["the cat sat on the mat", "the dog sat on the log", "a cat and a dog"]);
        for size in [20, 25, 30, 30_522] {
            let m = BpeModel::train(&c, size).unwrap();
            assert!(m.vocab_size() <= size);
        }
        assert!(matches!(
            BpeModel::train(&c, 5),
            Err(Error::VocabTooSmall { .. })
        ));
    }

    #[test]
    fn whole_word_is_one_id_and_unknown_byte_is_unk() {
        let c = corpus(&["hello hello hello world"]);
        let m = BpeModel::train(&c, 200).unwrap();
        let ids = m.encode("hello");
        assert_eq!(ids.len(), 1);
        assert_eq!(m.token_bytes(ids[0]).unwrap(), b" hello");
        let ids = m.encode("hez");
        assert!(ids.contains(&m.specials().unk));
        assert_eq!(m.decode(&ids).unwrap(), format!("he{UNK_MARKER}"));
    }

    #[test]
    fn decode_examples() {
        let c = corpus(&["the cat", "the hat"]);
        let m = BpeModel::train(&c, 40).unwrap();
        assert_eq!(m.decode(&[]).unwrap(), "");
        assert_eq!(m.decode(&m.encode("the cat")).unwrap(), "the cat");
        assert_eq!(m.decode(&m.encode("  the   hat ")).unwrap(), "the hat");
        assert!(matches!(m.decode(&[9999]), Err(Error::TokenOutOfRange { .. })));
    }

    #[test]
    fn text_format_roundtrip() {
        let c = corpus(&["naïve café — déjà vu", "the cat sat", "the cat ran"]);
        let m = BpeModel::train(&c, 60).unwrap();
        let back = BpeModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn training() -> Corpus {
            corpus(&[
                "the quick brown fox jumps over the lazy dog",
                "pack my box with five dozen liquor jugs",
                "how vexingly quick daft zebras jump",
                "The Five Boxing Wizards Jump Quickly, 0123456789!?.,'-",
                "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
            ])
        }

        proptest! {
            #[test]
            fn roundtrip_on_covered_text(words in prop::collection::vec("[a-zA-Z0-9!?.,'-]{1,8}", 0..12)) {
                let m = BpeModel::train(&training(), 120).unwrap();
                let text = words.join(" ");
                let ids = m.encode(&text);
                prop_assert!(ids.iter().all(|&i| (i as usize) < m.vocab_size()));
                prop_assert!(!ids.contains(&m.specials().unk));
                prop_assert_eq!(m.decode(&ids).unwrap(), text.clone());
                prop_assert_eq!(m.encode(&text), ids);
            }
        }
    }
}

//! Word-level tokenization for the count models and byte-level BPE for the
//! transformers.

mod bpe;

pub use bpe::{BpeModel, Specials, DEFAULT_VOCAB_SIZE, UNK_MARKER};

/// Lowercases, splits on whitespace and strips punctuation from both ends
/// of every token. Tokens that are pure punctuation disappear.
pub fn word_tokenize(s: &str) -> Vec<String> {
    s.split_whitespace()
        .filter_map(|w| {
            let t = w.trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c));
            (!t.is_empty()).then(|| t.to_lowercase())
        })
        .collect()
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
    )
}

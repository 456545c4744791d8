//! C interface. Objects are opaque handles created by `*_load`/`*_train`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`BpStatus`]; on failure the message is kept per thread and
//! read back with [`bp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use biasprop::bias_eval::{bias_score, load_pairs, NgramScorer, SentencePair, TransformerScorer};
use biasprop::corpus::{load_corpus, Corpus};
use biasprop::ngram::{NgramModel, SmoothingSpec};
use biasprop::tokenize::BpeModel;
use biasprop::transformer::{load_checkpoint, sparsemax, transformer_sentence_logprob, TransformerConfig, TransformerLM};
use biasprop::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidArgument = 4,
    Format = 5,
    Failed = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpSmoothing {
    Laplace = 0,
    AddLambda = 1,
    KneserNey = 2,
}

/// Sentences loaded from a file.
pub struct BpCorpus(Corpus);

/// Trained n-gram counts.
pub struct BpNgram(NgramModel);

/// Transformer checkpoint together with its tokenizer.
pub struct BpTransformer {
    model: TransformerLM,
    tokenizer: BpeModel,
}

/// Minimal pairs.
pub struct BpPairs(Vec<SentencePair>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BpStatus {
    match e {
        Error::Io { .. } => BpStatus::Io,
        Error::InvalidUtf8 { .. } => BpStatus::InvalidUtf8,
        Error::ModelFormat(_) | Error::Json(_) | Error::Csv(_) | Error::PairRow { .. } => BpStatus::Format,
        Error::InvalidFraction(_)
        | Error::InvalidLambda(_)
        | Error::ZeroOrder
        | Error::Config(_)
        | Error::Shape(_)
        | Error::NaN
        | Error::EmptyInput
        | Error::EmptyCorpus => BpStatus::InvalidArgument,
        _ => BpStatus::Failed,
    }
}

struct Fail(BpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BpStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            BpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(BpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(BpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(BpStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// `kind` holds a [`BpSmoothing`] value; it arrives as a plain integer so an
/// out-of-range value from C is an error rather than undefined behaviour.
fn smoothing(kind: i32, lambda: f64) -> Result<SmoothingSpec, Fail> {
    Ok(match kind {
        k if k == BpSmoothing::Laplace as i32 => SmoothingSpec::Laplace,
        k if k == BpSmoothing::AddLambda as i32 => SmoothingSpec::add_lambda(lambda)?,
        k if k == BpSmoothing::KneserNey as i32 => SmoothingSpec::kneser_ney(),
        k => return Err(Fail(BpStatus::InvalidArgument, format!("unknown smoothing {k}"))),
    })
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `path` and `label` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_corpus_load(path: *const c_char, label: *const c_char, out: *mut *mut BpCorpus) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = load_corpus(Path::new(str_arg(path, "path")?), str_arg(label, "label")?)?;
        *out = Box::into_raw(Box::new(BpCorpus(c)));
        Ok(())
    })
}

/// Number of sentences; 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_corpus_len(c: *const BpCorpus) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_corpus_free(c: *mut BpCorpus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_ngram_train(corpus: *const BpCorpus, n: usize, out: *mut *mut BpNgram) -> BpStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        let m = NgramModel::train(&(*corpus).0, n)?;
        *out = Box::into_raw(Box::new(BpNgram(m)));
        Ok(())
    })
}

/// Reads a model saved by `biasprop train-ngram` (`.bin` is binary).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_ngram_load(path: *const c_char, out: *mut *mut BpNgram) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = NgramModel::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(BpNgram(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bp_ngram_save(m: *const BpNgram, path: *const c_char) -> BpStatus {
    guard(|| {
        non_null(m, "model")?;
        (*m).0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Natural-log likelihood of a whitespace-tokenized sentence.
///
/// # Safety
/// `m` must be a live handle; `sentence` a NUL-terminated string; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bp_ngram_logprob(
    m: *const BpNgram,
    kind: i32,
    lambda: f64,
    sentence: *const c_char,
    out: *mut f64,
) -> BpStatus {
    guard(|| {
        non_null(m, "model")?;
        non_null(out, "out")?;
        let spec = smoothing(kind, lambda)?;
        *out = (*m).0.sentence_logprob(&spec, str_arg(sentence, "sentence")?);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_ngram_free(m: *mut BpNgram) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Loads a checkpoint and the tokenizer it was trained with.
///
/// # Safety
/// Both paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_transformer_load(
    checkpoint: *const c_char,
    tokenizer: *const c_char,
    out: *mut *mut BpTransformer,
) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let (model, meta) = load_checkpoint(Path::new(str_arg(checkpoint, "checkpoint")?))?;
        let tok = BpeModel::load(Path::new(str_arg(tokenizer, "tokenizer")?))?;
        if tok.fingerprint() != meta.vocab_fingerprint {
            return Err(Fail(BpStatus::InvalidArgument, "tokenizer does not match the checkpoint".into()));
        }
        *out = Box::into_raw(Box::new(BpTransformer { model, tokenizer: tok }));
        Ok(())
    })
}

/// Natural-log likelihood of a sentence under the transformer.
///
/// # Safety
/// `t` must be a live handle; `sentence` a NUL-terminated string; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bp_transformer_logprob(t: *const BpTransformer, sentence: *const c_char, out: *mut f64) -> BpStatus {
    guard(|| {
        non_null(t, "model")?;
        non_null(out, "out")?;
        let t = &*t;
        *out = transformer_sentence_logprob(&t.model, &t.tokenizer, str_arg(sentence, "sentence")?)?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_transformer_free(t: *mut BpTransformer) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Reads a CrowS-Pairs-format CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_pairs_load(path: *const c_char, out: *mut *mut BpPairs) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = load_pairs(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(BpPairs(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_pairs_len(p: *const BpPairs) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_pairs_free(p: *mut BpPairs) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Overall bias score of an n-gram model on `pairs`.
///
/// # Safety
/// `m` and `pairs` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_bias_score_ngram(
    m: *const BpNgram,
    kind: i32,
    lambda: f64,
    pairs: *const BpPairs,
    out: *mut f64,
) -> BpStatus {
    guard(|| {
        non_null(m, "model")?;
        non_null(pairs, "pairs")?;
        non_null(out, "out")?;
        let scorer = NgramScorer { model: &(*m).0, smoothing: smoothing(kind, lambda)? };
        *out = bias_score(&scorer, &(*pairs).0)?.overall;
        Ok(())
    })
}

/// Overall bias score of a transformer on `pairs`.
///
/// # Safety
/// `t` and `pairs` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bp_bias_score_transformer(t: *const BpTransformer, pairs: *const BpPairs, out: *mut f64) -> BpStatus {
    guard(|| {
        non_null(t, "model")?;
        non_null(pairs, "pairs")?;
        non_null(out, "out")?;
        let t = &*t;
        let scorer = TransformerScorer { model: &t.model, tokenizer: &t.tokenizer };
        *out = bias_score(&scorer, &(*pairs).0)?.overall;
        Ok(())
    })
}

/// Projects `z[0..n]` onto the probability simplex, writing `out[0..n]`.
///
/// # Safety
/// `z` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_sparsemax(z: *const f64, n: usize, out: *mut f64) -> BpStatus {
    guard(|| {
        non_null(z, "z")?;
        non_null(out, "out")?;
        let p = sparsemax(std::slice::from_raw_parts(z, n))?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&p);
        Ok(())
    })
}

/// Parameter count of the larger preset at the given vocabulary size.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bp_large_preset_params(vocab_size: usize, out: *mut usize) -> BpStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = TransformerConfig::large(vocab_size);
        cfg.validate()?;
        *out = cfg.param_count();
        Ok(())
    })
}

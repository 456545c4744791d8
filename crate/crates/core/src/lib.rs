//! Laboratory for measuring how social bias propagates through language
//! models: count-based n-gram models and small transformers are trained on
//! corpora with controlled stereotype injection and scored on minimal pairs.

pub mod bias_eval;
pub mod cooccur;
pub mod corpus;
pub mod error;
pub mod ngram;
pub mod runner;
pub mod stats;
pub mod synth;
pub mod tokenize;
pub mod transformer;

pub use error::{Error, Result};

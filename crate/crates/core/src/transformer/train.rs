use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::Real;
use super::model::{Batch, TransformerLM};
use super::optim::AdamW;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::BpeModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Sequences per batch; batches are drawn from length-sorted runs.
    pub batch_size: usize,
    /// Framed sequences longer than this are truncated.
    pub max_len: usize,
    pub seed: u64,
    /// Arithmetic of the forward and backward passes. Master weights and
    /// optimizer state stay in f64 either way.
    #[serde(default)]
    pub precision: Precision,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 10,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            batch_size: 16,
            max_len: 256,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.weight_decay < 0.0 || self.eps <= 0.0 {
            return bad("weight decay must be >= 0 and eps > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_len < 2 {
            return bad("max_len must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Token-weighted mean training loss of each epoch, in nats.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub sequences: usize,
    pub tokens_per_epoch: usize,
    pub truncated: usize,
}

impl TrainReport {
    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{},{l}\n", i + 1));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    /// `1 - last / first`.
    pub fn relative_drop(&self) -> f64 {
        match (self.epoch_losses.first(), self.epoch_losses.last()) {
            (Some(f), Some(l)) => 1.0 - l / f,
            _ => 0.0,
        }
    }
}

/// `BOS ids EOS` for a sentence.
pub fn frame(tok: &BpeModel, text: &str) -> Vec<u32> {
    let sp = tok.specials();
    let mut ids = Vec::with_capacity(text.len() / 3 + 2);
    ids.push(sp.bos);
    ids.extend(tok.encode(text));
    ids.push(sp.eos);
    ids
}

/// One optimizer update on `batch`. Dropout is active when `dropout_rng` is
/// given. Returns the batch loss before the update.
pub fn train_step(
    model: &mut TransformerLM,
    opt: &mut AdamW,
    batch: &Batch,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<f64> {
    let (loss, grad) = model.loss_and_grad(batch, dropout_rng)?;
    apply(model, opt, loss, &grad)
}

/// [`train_step`] with the passes run on `shadow`, a copy of the parameters
/// in precision `T`.
fn step_at<T: Real>(
    model: &mut TransformerLM,
    opt: &mut AdamW,
    shadow: &mut Vec<T>,
    batch: &Batch,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<f64> {
    shadow.clear();
    shadow.extend(model.params().iter().map(|&x| T::lit(x)));
    let (loss, grad) = model.loss_and_grad_at(shadow, batch, dropout_rng)?;
    apply(model, opt, loss, &grad)
}

fn apply<T: Real>(model: &mut TransformerLM, opt: &mut AdamW, loss: f64, grad: &[T]) -> Result<f64> {
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { loss, step: opt.steps() as usize + 1 });
    }
    let (params, blocks) = model.params_and_blocks_mut();
    opt.step(params, grad, blocks);
    Ok(loss)
}

/// Trains on the sentences of `corpus`, encoded with `tok`.
pub fn train(model: &mut TransformerLM, corpus: &Corpus, tok: &BpeModel, spec: &TrainSpec) -> Result<TrainReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if tok.vocab_size() > model.config().vocab_size {
        return Err(Error::Config(format!(
            "tokenizer has {} entries, model vocabulary {}",
            tok.vocab_size(),
            model.config().vocab_size
        )));
    }
    let seqs: Vec<Vec<u32>> = corpus.texts().map(|t| frame(tok, t)).collect();
    train_sequences(model, seqs, spec)
}

/// Trains on pre-framed id sequences. Each epoch shuffles, sorts by length
/// (stable, so ties stay shuffled), cuts batches and shuffles batch order.
pub fn train_sequences(model: &mut TransformerLM, mut seqs: Vec<Vec<u32>>, spec: &TrainSpec) -> Result<TrainReport> {
    spec.validate()?;
    let limit = spec.max_len.min(model.config().max_positions + 1);
    let mut truncated = 0;
    for s in &mut seqs {
        if s.len() > limit {
            s.truncate(limit);
            truncated += 1;
        }
    }
    seqs.retain(|s| s.len() >= 2);
    if seqs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let tokens_per_epoch: usize = seqs.iter().map(|s| s.len() - 1).sum();

    let mut order_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    drop_rng.set_stream(1);
    let use_dropout = model.config().dropout > 0.0;
    let mut opt = AdamW::new(model.param_count(), spec);
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    let mut idx: Vec<usize> = (0..seqs.len()).collect();
    let mut shadow: Vec<f32> = Vec::new();
    for _ in 0..spec.epochs {
        idx.shuffle(&mut order_rng);
        idx.sort_by_key(|&i| seqs[i].len());
        let mut batches: Vec<&[usize]> = idx.chunks(spec.batch_size).collect();
        batches.shuffle(&mut order_rng);
        let mut sum = 0.0;
        for b in batches {
            let members: Vec<&[u32]> = b.iter().map(|&i| seqs[i].as_slice()).collect();
            let batch = Batch::from_framed(&members);
            let rng = use_dropout.then_some(&mut drop_rng);
            let loss = match spec.precision {
                Precision::F32 => step_at(model, &mut opt, &mut shadow, &batch, rng)?,
                Precision::F64 => train_step(model, &mut opt, &batch, rng)?,
            };
            sum += loss * batch.rows() as f64;
        }
        epoch_losses.push(sum / tokens_per_epoch as f64);
    }
    Ok(TrainReport {
        epoch_losses,
        steps: opt.steps() as usize,
        sequences: seqs.len(),
        tokens_per_epoch,
        truncated,
    })
}

/// Teacher-forced log-likelihood in nats of `BOS s EOS`, dropout off.
pub fn transformer_sentence_logprob(model: &TransformerLM, tok: &BpeModel, s: &str) -> Result<f64> {
    let ids = frame(tok, s);
    check_len(model, &ids)?;
    Ok(model.sequence_logprobs(&Batch::from_framed(&[ids]))?[0])
}

fn check_len(model: &TransformerLM, ids: &[u32]) -> Result<()> {
    let max = model.config().max_positions;
    if ids.len() > max {
        return Err(Error::SequenceTooLong { len: ids.len(), max });
    }
    Ok(())
}

/// Scores many sentences, packing them into batches. Over-length sentences
/// yield an error in their slot.
pub fn transformer_sentence_logprobs(model: &TransformerLM, tok: &BpeModel, sentences: &[&str]) -> Vec<Result<f64>> {
    const CHUNK: usize = 64;
    let framed: Vec<Result<Vec<u32>>> = sentences
        .iter()
        .map(|s| {
            let ids = frame(tok, s);
            check_len(model, &ids).map(|_| ids)
        })
        .collect();
    let mut out: Vec<Option<Result<f64>>> = framed
        .iter()
        .map(|f| match f {
            Err(Error::SequenceTooLong { len, max }) => Some(Err(Error::SequenceTooLong { len: *len, max: *max })),
            _ => None,
        })
        .collect();
    let ok: Vec<usize> = (0..framed.len()).filter(|&i| framed[i].is_ok()).collect();
    for chunk in ok.chunks(CHUNK) {
        let seqs: Vec<&[u32]> = chunk
            .iter()
            .map(|&i| framed[i].as_ref().map(Vec::as_slice).unwrap_or(&[]))
            .collect();
        match model.sequence_logprobs(&Batch::from_framed(&seqs)) {
            Ok(lps) => {
                for (&i, lp) in chunk.iter().zip(lps) {
                    out[i] = Some(Ok(lp));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                for &i in chunk {
                    out[i] = Some(Err(Error::Shape(msg.clone())));
                }
            }
        }
    }
    out.into_iter().map(|o| o.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::super::config::{AttentionKind, TransformerConfig, WindowNormalizer};
    use super::*;

    fn small(vocab: usize, attention: AttentionKind) -> TransformerConfig {
        TransformerConfig {
            vocab_size: vocab,
            layers: 1,
            heads: 2,
            embed_dim: 16,
            head_dim: 8,
            ffn_dim: 32,
            max_positions: 32,
            output_dim: None,
            dropout: 0.1,
            attention,
            window_radius: Some(2),
            window_normalizer: WindowNormalizer::Sparsemax,
            tie_embeddings: false,
        }
    }

    fn corpus() -> Corpus {
        let lines: Vec<String> = (0..60)
            .map(|i| match i % 3 {
                0 => "the cat sat on the mat".to_string(),
                1 => "a dog ran in the park".to_string(),
                _ => "the bird flew over the tree".to_string(),
            })
            .collect();
        Corpus::from_lines("toy", &lines)
    }

    #[test]
    fn rejects_zero_epochs_and_empty_corpus() {
        let c = corpus();
        let tok = BpeModel::train(&c, 200).unwrap();
        let mut m = TransformerLM::new(small(tok.vocab_size(), AttentionKind::Softmax), 0).unwrap();
        let spec = TrainSpec { epochs: 0, ..TrainSpec::default() };
        assert!(matches!(train(&mut m, &c, &tok, &spec), Err(Error::Config(_))));
        let empty = Corpus::from_lines::<&str>("e", &[]);
        assert!(matches!(train(&mut m, &empty, &tok, &TrainSpec::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn single_step_decreases_loss_on_repeated_sequence() {
        for att in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
            let mut cfg = small(30, att);
            cfg.dropout = 0.0;
            let mut m = TransformerLM::new(cfg, 3).unwrap();
            let s = vec![2u32, 7, 8, 9, 10, 3];
            let batch = Batch::from_framed(&[&s, &s, &s]);
            let spec = TrainSpec { lr: 1e-3, ..TrainSpec::default() };
            let mut opt = AdamW::new(m.param_count(), &spec);
            let before = m.loss(&batch).unwrap();
            train_step(&mut m, &mut opt, &batch, None).unwrap();
            assert!(m.loss(&batch).unwrap() < before);
        }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let c = corpus();
        let tok = BpeModel::train(&c, 200).unwrap();
        let spec = TrainSpec { lr: 1e-3, epochs: 4, seed: 9, ..TrainSpec::default() };
        let run = || {
            let mut m = TransformerLM::new(small(tok.vocab_size(), AttentionKind::SparseWindow), 1).unwrap();
            let r = train(&mut m, &c, &tok, &spec).unwrap();
            (m, r)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        let bits = |r: &TrainReport| r.epoch_losses.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r1), bits(&r2));
        assert_eq!(m1, m2);
        assert!(r1.epoch_losses.last() < r1.epoch_losses.first());
        assert_eq!(r1.steps, 4 * 60usize.div_ceil(spec.batch_size));

        let good = transformer_sentence_logprob(&m1, &tok, "the cat sat on the mat").unwrap();
        let shuffled = transformer_sentence_logprob(&m1, &tok, "mat the on sat cat the").unwrap();
        assert!(good < 0.0 && good > shuffled);
        assert_eq!(good, transformer_sentence_logprob(&m1, &tok, "the cat sat on the mat").unwrap());
    }

    #[test]
    fn batched_scoring_matches_single() {
        let c = corpus();
        let tok = BpeModel::train(&c, 200).unwrap();
        let m = TransformerLM::new(small(tok.vocab_size(), AttentionKind::Softmax), 5).unwrap();
        let long = vec!["cat"; 40].join(" ");
        let sents = ["the cat sat", "a dog", long.as_str(), "the tree flew over the park"];
        let all = transformer_sentence_logprobs(&m, &tok, &sents);
        for (s, r) in sents.iter().zip(&all) {
            match transformer_sentence_logprob(&m, &tok, s) {
                Ok(v) => assert_eq!(v, *r.as_ref().unwrap()),
                Err(Error::SequenceTooLong { .. }) => assert!(matches!(r, Err(Error::SequenceTooLong { .. }))),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

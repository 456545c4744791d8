//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! `BIASPROP_ACCEPTANCE=1,3,9` restricts the run to the listed criteria.

mod stats_battery;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use biasprop::bias_eval::{bias_score, mean_abs_deviation, score_pair, Category, PairDirection, ScorableLM, SentencePair};
use biasprop::cooccur::{conditional_prob, count_cooccurrence, default_gap, prestige_gap, GroupLexicon};
use biasprop::corpus::Corpus;
use biasprop::ngram::{NgramModel, SmoothingSpec};
use biasprop::runner::{run_experiment, ExperimentConfig, ExperimentReport};
use biasprop::stats::{bonferroni, paired_ttest, spearman_rho, welch_ttest, StatResult};
use biasprop::synth::toy_corpus;
use biasprop::tokenize::{word_tokenize, BpeModel};
use biasprop::transformer::{
    sparsemax, train, AttentionKind, Batch, TrainSpec, TransformerConfig, TransformerLM, WindowNormalizer,
};
use biasprop::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, u64, Check); 12] = [
        (1, "smoothing oracles", 1, c1_smoothing),
        (2, "modified Kneser-Ney brute-force equivalence", 30, c2_modified_kn),
        (3, "sparsemax enumeration oracle", 5, c3_sparsemax),
        (4, "gradient check", 120, c4_gradients),
        (5, "training sanity, 18 architectures", 900, c5_training),
        (6, "bias score with stub LM", 1, c6_bias_score),
        (7, "order staircase", 600, c7_staircase),
        (8, "injection slope, transformer vs n-gram", 3600, c8_injection_slope),
        (9, "statistics battery", 1, c9_stats),
        (10, "co-occurrence probe", 1, c10_cooccur),
        (11, "determinism", 600, c11_determinism),
        (12, "large preset parameter count", 60, c12_large_preset),
    ];
    let only: Option<BTreeSet<usize>> = std::env::var("BIASPROP_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());

    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let took = start.elapsed();
        let over = took > Duration::from_secs(budget);
        let (pass, detail) = match res {
            Ok(d) if over => (false, format!("{d}; over the {budget}s budget")),
            Ok(d) => (true, d),
            Err(e) => (false, e),
        };
        failed += usize::from(!pass);
        println!(
            "{} C{id:<2} {name} [{:.1}s / {budget}s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- C1

fn c1_smoothing() -> std::result::Result<String, String> {
    let m = NgramModel::train(&Corpus::from_lines("toy", &["a b", "a c"]), 2).map_err(|e| e.to_string())?;
    let lap = SmoothingSpec::Laplace;
    let add = |l: f64| SmoothingSpec::add_lambda(l).unwrap();
    let kn = SmoothingSpec::kn_fixed(0.5);
    // |V| = {a, b, c, </s>, <unk>} = 5, C(a) = 2, C(<s>) = 2, C(b) = 1.
    // Continuation counts: a 1, b 1, c 1, </s> 2, out of 5 bigram types.
    let cases: [(&str, SmoothingSpec, &str, &str, f64); 14] = [
        ("laplace", lap, "a", "b", 2.0 / 7.0),
        ("laplace", lap, "b", "</s>", 2.0 / 6.0),
        ("laplace", lap, "a", "a", 1.0 / 7.0),
        ("laplace", lap, "zzz", "b", 1.0 / 5.0),
        ("add-0.1", add(0.1), "a", "b", 1.1 / 2.5),
        ("add-0.1", add(0.1), "<s>", "a", 2.1 / 2.5),
        ("add-0.5", add(0.5), "a", "b", 1.5 / 4.5),
        ("add-0.5", add(0.5), "a", "</s>", 0.5 / 4.5),
        ("add-1", add(1.0), "a", "b", 2.0 / 7.0),
        ("add-1", add(1.0), "c", "</s>", 2.0 / 6.0),
        ("kn", kn, "a", "b", 0.25 + 0.5 * 0.2),
        ("kn", kn, "b", "</s>", 0.5 + 0.5 * 0.4),
        ("kn", kn, "<s>", "a", 0.75 + 0.25 * 0.2),
        ("kn", kn, "b", "b", 0.5 * 0.2),
    ];
    for (name, spec, ctx, w, want) in cases {
        let got = m.prob(&spec, &[ctx], w);
        ensure(close(got, want, 1e-12), || format!("{name} P({w}|{ctx}) = {got}, expected {want}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let specs = [
        SmoothingSpec::Laplace,
        add(0.1),
        add(0.5),
        add(1.0),
        SmoothingSpec::kn_fixed(0.5),
        SmoothingSpec::kneser_ney(),
    ];
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let words: Vec<String> = (0..rng.gen_range(2..7)).map(|i| format!("w{i}")).collect();
        let lines: Vec<String> = (0..rng.gen_range(1..9))
            .map(|_| {
                (0..rng.gen_range(1..7))
                    .map(|_| words.choose(&mut rng).unwrap().as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let n = rng.gen_range(1..5);
        let m = NgramModel::train(&Corpus::from_lines("r", &lines), n).map_err(|e| e.to_string())?;
        let mut pool: Vec<&str> = words.iter().map(String::as_str).collect();
        pool.extend(["<s>", "unseen"]);
        let ctx: Vec<&str> = (0..n - 1).map(|_| *pool.choose(&mut rng).unwrap()).collect();
        let vocab: Vec<&str> = m.vocab().collect();
        for spec in &specs {
            let s: f64 = vocab.iter().map(|w| m.prob(spec, &ctx, w)).sum();
            worst = worst.max((s - 1.0).abs());
            ensure((s - 1.0).abs() <= 1e-9, || format!("case {case}: {spec:?} after {ctx:?} sums to {s}"))?;
        }
    }
    Ok(format!("{} hand values exact; 1000 random distributions, max |sum - 1| = {worst:.1e}", cases.len()))
}

// ---------------------------------------------------------------- C2

/// Interpolated modified Kneser-Ney computed straight from the framed
/// training windows, recursing from the top order down.
struct BruteKn {
    n: usize,
    vocab: usize,
    known: BTreeSet<String>,
    /// Distinct grams of each order with their adjusted counts.
    adjusted: Vec<HashMap<Vec<String>, u64>>,
    discounts: Vec<[f64; 3]>,
}

impl BruteKn {
    fn new(lines: &[String], n: usize) -> Self {
        let mut known = BTreeSet::new();
        let mut windows: Vec<Vec<String>> = Vec::new();
        for l in lines {
            let words = word_tokenize(l);
            known.extend(words.iter().cloned());
            let mut seq = vec!["<s>".to_string(); n - 1];
            seq.extend(words);
            seq.push("</s>".to_string());
            for w in seq.windows(n) {
                windows.push(w.to_vec());
            }
        }
        let mut adjusted: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); n + 1];
        for w in &windows {
            *adjusted[n].entry(w.clone()).or_default() += 1;
        }
        for k in (1..n).rev() {
            // continuation count: distinct left extensions among order-(k+1) grams
            let mut ext: HashMap<Vec<String>, BTreeSet<String>> = HashMap::new();
            for g in adjusted[k + 1].keys() {
                ext.entry(g[1..].to_vec()).or_default().insert(g[0].clone());
            }
            adjusted[k] = ext.into_iter().map(|(g, s)| (g, s.len() as u64)).collect();
        }
        let discounts = (1..=n)
            .map(|k| {
                let mut nc = [0f64; 4];
                for &c in adjusted[k].values() {
                    if (1..=4).contains(&c) {
                        nc[c as usize - 1] += 1.0;
                    }
                }
                let fallback = [0.75; 3];
                if nc[0] == 0.0 || nc[1] == 0.0 || nc[2] == 0.0 {
                    return fallback;
                }
                let y = nc[0] / (nc[0] + 2.0 * nc[1]);
                let d1 = 1.0 - 2.0 * y * nc[1] / nc[0];
                let d2 = 2.0 - 3.0 * y * nc[2] / nc[1];
                let d3 = 3.0 - 4.0 * y * nc[3] / nc[2];
                if (0.0..=1.0).contains(&d1) && (0.0..=2.0).contains(&d2) && (0.0..=3.0).contains(&d3) {
                    [d1, d2, d3]
                } else {
                    fallback
                }
            })
            .collect();
        BruteKn { n, vocab: known.len() + 2, known, adjusted, discounts }
    }

    fn d(&self, k: usize, c: u64) -> f64 {
        match c {
            0 => 0.0,
            1 | 2 => self.discounts[k - 1][c as usize - 1],
            _ => self.discounts[k - 1][2],
        }
    }

    /// P_k(w | h) with `h` the last k-1 tokens.
    fn p(&self, k: usize, h: &[String], w: &str) -> f64 {
        let mut total = 0u64;
        let mut buckets = [0u64; 3];
        let mut count = 0u64;
        for (g, &c) in &self.adjusted[k] {
            if g[..k - 1] == *h {
                total += c;
                buckets[(c.min(3) - 1) as usize] += 1;
                if g[k - 1] == w {
                    count = c;
                }
            }
        }
        let lower = if k == 1 { 1.0 / self.vocab as f64 } else { self.p(k - 1, &h[1..], w) };
        if total == 0 {
            return lower;
        }
        let gamma = (self.d(k, 1) * buckets[0] as f64 + self.d(k, 2) * buckets[1] as f64 + self.d(k, 3) * buckets[2] as f64)
            / total as f64;
        (count as f64 - self.d(k, count)).max(0.0) / total as f64 + gamma * lower
    }

    fn sentence_logprob(&self, s: &str) -> f64 {
        let mut seq = vec!["<s>".to_string(); self.n - 1];
        seq.extend(word_tokenize(s).into_iter().map(|w| if self.known.contains(&w) { w } else { "<unk>".into() }));
        seq.push("</s>".to_string());
        seq.windows(self.n).map(|g| self.p(self.n, &g[..self.n - 1], &g[self.n - 1]).ln()).sum()
    }
}

fn c2_modified_kn() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = SmoothingSpec::kneser_ney();
    let (mut sentences, mut worst, mut fallbacks, mut orders) = (0, 0.0f64, 0, 0);
    for case in 0..20 {
        let n = 1 + case % 5;
        let vocab: Vec<String> = (0..rng.gen_range(4..16)).map(|i| format!("t{i}")).collect();
        // skewed draws give a spread of counts-of-counts
        let draw = |rng: &mut ChaCha8Rng| {
            let i = (rng.gen::<f64>().powi(2) * vocab.len() as f64) as usize;
            vocab[i.min(vocab.len() - 1)].clone()
        };
        let lines: Vec<String> = (0..rng.gen_range(20..=200))
            .map(|_| (0..rng.gen_range(1..12)).map(|_| draw(&mut rng)).collect::<Vec<_>>().join(" "))
            .collect();
        let model = NgramModel::train(&Corpus::from_lines("r", &lines), n).map_err(|e| e.to_string())?;
        let brute = BruteKn::new(&lines, n);
        for (k, o) in model.discount_report().orders.iter().enumerate() {
            fallbacks += usize::from(o.fallback);
            orders += 1;
            let want = brute.discounts[k];
            ensure(o.d.iter().zip(want).all(|(a, b)| close(*a, b, 1e-12)), || {
                format!("case {case}: order {} discounts {:?} vs {want:?}", k + 1, o.d)
            })?;
        }
        let mut probes: Vec<String> = lines.choose_multiple(&mut rng, 15).cloned().collect();
        for _ in 0..10 {
            let mut s: Vec<String> = (0..rng.gen_range(1..10)).map(|_| draw(&mut rng)).collect();
            s.insert(rng.gen_range(0..=s.len()), "oov".into());
            probes.push(s.join(" "));
        }
        for s in &probes {
            let (got, want) = (model.sentence_logprob(&spec, s), brute.sentence_logprob(s));
            let err = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("case {case} n={n} {s:?}: {got} vs {want}"))?;
            sentences += 1;
        }
    }
    Ok(format!(
        "20 corpora, {sentences} sentences, max rel err {worst:.1e}; {} of {orders} orders had estimated discounts",
        orders - fallbacks
    ))
}

// ---------------------------------------------------------------- C3

/// Simplex projection by trying every support set.
fn enumerate_projection(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let ok = (0..d).all(|i| if mask & (1 << i) != 0 { z[i] > tau } else { z[i] <= tau });
        if ok {
            return z.iter().map(|&x| (x - tau).max(0.0)).collect();
        }
    }
    unreachable!("some support is always consistent")
}

fn c3_sparsemax() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dim8, mut dim8_zero, mut worst) = (0, 0, 0.0f64);
    for case in 0..1000 {
        let d = 2 + case % 7;
        let scale = rng.gen_range(0.05..3.0);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let p = sparsemax(&z).map_err(|e| e.to_string())?;
        let want = enumerate_projection(&z);
        for (a, b) in p.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        ensure(p.iter().zip(&want).all(|(a, b)| close(*a, *b, 1e-6)), || format!("{z:?}: {p:?} vs {want:?}"))?;
        let s: f64 = p.iter().sum();
        ensure(close(s, 1.0, 1e-12), || format!("{z:?} sums to {s}"))?;
        if d == 8 {
            dim8 += 1;
            dim8_zero += usize::from(p.contains(&0.0));
        }
    }
    let frac = dim8_zero as f64 / dim8 as f64;
    ensure(frac >= 0.3, || format!("only {:.0}% of dim-8 outputs have an exact zero", 100.0 * frac))?;
    Ok(format!("max abs err {worst:.1e}; exact zeros in {:.0}% of {dim8} dim-8 cases", 100.0 * frac))
}

// ---------------------------------------------------------------- C4

fn grad_batch(vocab: u32, rng: &mut ChaCha8Rng) -> Batch {
    let seqs: Vec<Vec<u32>> = (0..4).map(|i| (0..6 + i).map(|_| rng.gen_range(0..vocab)).collect()).collect();
    Batch::from_framed(&seqs)
}

/// Per-block relative error `|fd - g| / max(|fd|, |g|)` over the chosen
/// coordinates. Returns the worst block and its error.
fn block_errors(
    m: &mut TransformerLM,
    batch: &Batch,
    sample: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(usize, f64), String> {
    let (_, g) = m.loss_and_grad(batch, None).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let blocks = m.blocks().to_vec();
    for blk in &blocks {
        let mut idx: Vec<usize> = blk.range().collect();
        if let Some(k) = sample {
            idx.shuffle(rng);
            idx.truncate(k);
        }
        let (mut diff, mut nf, mut ng) = (0.0f64, 0.0f64, 0.0f64);
        for i in idx {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let lp = m.loss(batch).map_err(|e| e.to_string())?;
            m.params_mut()[i] = orig - h;
            let lm = m.loss(batch).map_err(|e| e.to_string())?;
            m.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            diff += (fd - g[i]).powi(2);
            nf += fd * fd;
            ng += g[i] * g[i];
        }
        let scale = nf.sqrt().max(ng.sqrt());
        // both zero: the gradient is identically zero (key biases)
        let rel = if scale < 1e-8 { 0.0 } else { diff.sqrt() / scale };
        ensure(rel < 1e-4, || format!("{} ({}x{}): relative error {rel:.2e}", blk.name, blk.rows, blk.cols))?;
        worst = worst.max(rel);
    }
    Ok((blocks.len(), worst))
}

fn c4_gradients() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    for attention in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
        // narrow 2-layer/4-head model, every coordinate
        let narrow = TransformerConfig {
            embed_dim: 16,
            head_dim: 4,
            ffn_dim: 24,
            max_positions: 16,
            ..TransformerConfig::grid(23, 2, 4, attention)
        };
        let mut m = TransformerLM::new(narrow, 41).map_err(|e| e.to_string())?;
        // move off the unit-gain, zero-bias initial point
        for x in m.params_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
        let b = grad_batch(23, &mut rng);
        let (blocks, worst) = block_errors(&mut m, &b, None, &mut rng)?;
        notes.push(format!("{} full: {blocks} blocks, worst {worst:.1e}", attention.name()));

        // grid width, sampled coordinates
        let wide = TransformerConfig { max_positions: 16, ..TransformerConfig::grid(40, 2, 4, attention) };
        let mut m = TransformerLM::new(wide, 42).map_err(|e| e.to_string())?;
        for x in m.params_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
        let b = grad_batch(40, &mut rng);
        let (blocks, worst) = block_errors(&mut m, &b, Some(24), &mut rng)?;
        notes.push(format!("{} grid width: {blocks} blocks, worst {worst:.1e}", attention.name()));
    }
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------- C5

fn c5_training() -> std::result::Result<String, String> {
    let corpus = toy_corpus("toy", 1000, 1);
    let tok = BpeModel::train(&corpus, 2000).map_err(|e| e.to_string())?;
    let spec = TrainSpec::default();
    let mut drops = Vec::new();
    for attention in [AttentionKind::Softmax, AttentionKind::SparseWindow] {
        for layers in [2, 4, 6] {
            for heads in [4, 8, 16] {
                let cfg = TransformerConfig::grid(tok.vocab_size(), layers, heads, attention);
                let mut m = TransformerLM::new(cfg, 5).map_err(|e| e.to_string())?;
                let r = train(&mut m, &corpus, &tok, &spec).map_err(|e| e.to_string())?;
                let drop = r.relative_drop();
                let name = format!("{}L/{}H {}", layers, heads, attention.name());
                ensure(r.epoch_losses.len() == 10, || format!("{name}: {} epochs", r.epoch_losses.len()))?;
                ensure(drop >= 0.3, || format!("{name}: loss dropped only {:.1}%", 100.0 * drop))?;
                drops.push(drop);
            }
        }
    }
    let min = drops.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("{} architectures, smallest loss drop {:.1}%", drops.len(), 100.0 * min))
}

// ---------------------------------------------------------------- C6

struct Scripted(HashMap<&'static str, f64>);

impl ScorableLM for Scripted {
    fn logprob(&self, sentence: &str) -> Result<f64> {
        self.0.get(sentence).copied().ok_or(Error::EmptyInput)
    }

    fn token_count(&self, sentence: &str) -> usize {
        sentence.split_whitespace().count() + 1
    }
}

fn c6_bias_score() -> std::result::Result<String, String> {
    use Category::*;
    // (category, direction, more, less, l_more, l_less); NaN marks a sentence
    // the stub cannot score
    let script: [(Category, PairDirection, &'static str, &'static str, f64, f64); 11] = [
        (Race, PairDirection::Stereo, "r1 more", "r1 less", -10.0, -12.0),
        (Race, PairDirection::Stereo, "r2 more", "r2 less", -15.0, -11.0),
        (Race, PairDirection::Antistereo, "r3 more", "r3 less", -7.0, -7.0),
        (Gender, PairDirection::Stereo, "g1 more", "g1 less", -3.0, -4.0),
        (Gender, PairDirection::Antistereo, "g2 more", "g2 less", -8.0, -2.0),
        (Religion, PairDirection::Antistereo, "l1 more", "l1 less", -1.0, -9.0),
        (Age, PairDirection::Stereo, "a1 more", "a1 less", -5.0, -5.5),
        (Age, PairDirection::Stereo, "a2 more", "a2 less", -4.0, f64::NAN),
        (Disability, PairDirection::Stereo, "d1 more", "d1 less", -20.0, -20.0),
        (Disability, PairDirection::Stereo, "d2 more", "d2 less", -2.25, -2.5),
        (Disability, PairDirection::Stereo, "d3 more", "d3 less", -6.0, -5.75),
    ];
    let mut lm = HashMap::new();
    let mut pairs = Vec::new();
    for (cat, dir, more, less, lm_more, lm_less) in script {
        lm.insert(more, lm_more);
        if !lm_less.is_nan() {
            lm.insert(less, lm_less);
        }
        pairs.push(SentencePair {
            sent_more: more.into(),
            sent_less: less.into(),
            direction: dir,
            bias_type: cat,
            target: String::new(),
            context: None,
        });
    }
    let lm = Scripted(lm);

    let expect_b = [1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0];
    for (i, p) in pairs.iter().enumerate() {
        if i == 7 {
            ensure(score_pair(&lm, p).is_err(), || "unscoreable pair was scored".into())?;
            continue;
        }
        let s = score_pair(&lm, p).map_err(|e| e.to_string())?;
        ensure(s.b == expect_b[i], || format!("pair {i}: b = {}, expected {}", s.b, expect_b[i]))?;
    }
    ensure(score_pair(&lm, &pairs[2]).unwrap().b == 0, || "tie did not score 0".into())?;

    let r = bias_score(&lm, &pairs).map_err(|e| e.to_string())?;
    ensure(r.scored == 10 && r.skipped == 1, || format!("scored {} skipped {}", r.scored, r.skipped))?;
    ensure(r.overall == 5.0 / 10.0, || format!("B = {}", r.overall))?;
    let hand: [(Category, Option<f64>, usize); 9] = [
        (Race, Some(1.0 / 3.0), 3),
        (Gender, Some(1.0 / 2.0), 2),
        (Religion, Some(1.0), 1),
        (Nationality, None, 0),
        (Age, Some(1.0), 1),
        (SexualOrientation, None, 0),
        (Disability, Some(1.0 / 3.0), 3),
        (Socioeconomic, None, 0),
        (PhysicalAppearance, None, 0),
    ];
    for (cat, score, n) in hand {
        let got = r.category(cat);
        ensure(got.score == score && got.pairs == n, || format!("{cat}: {:?} over {}", got.score, got.pairs))?;
    }
    ensure(r.per_category.iter().map(|c| c.category).eq(Category::ALL), || "category order".into())?;
    let rec = &r.pairs[0];
    ensure(rec.more_per_token == Some(-10.0 / 3.0) && rec.less_per_token == Some(-12.0 / 3.0), || {
        "per-token values".into()
    })?;
    ensure(r.pairs[7].b.is_none() && r.pairs[7].skip_reason.is_some(), || "skip record".into())?;

    let weighted: f64 = r.per_category.iter().filter_map(|c| c.score.map(|s| s * c.pairs as f64)).sum::<f64>()
        / r.per_category.iter().map(|c| c.pairs).sum::<usize>() as f64;
    ensure(close(weighted, r.overall, 1e-12), || format!("weighted mean {weighted} vs {}", r.overall))?;

    let mad = mean_abs_deviation(&[0.5, 0.75, 0.25, 1.0]).map_err(|e| e.to_string())?;
    ensure(mad == 0.25, || format!("mean absolute deviation {mad}"))?;
    Ok("B = 5/10 over 10 scored, 1 skipped; ties score 0; category means exact".into())
}

// ---------------------------------------------------------------- C7

fn c7_staircase() -> std::result::Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
cache_dir = "{}"
seeds = [0]
injection = [0.0, 0.33, 1.0]

[[corpora]]
label = "base50k"
generate = {{ sentences = 50000, seed = 71 }}

[bias_set]
generate = {{ sentences = 1000, seed = 72 }}

[pairs]
generate_seed = 73

[ngram]
orders = [2, 4, 6]
smoothing = ["laplace", "kneser-ney"]
"#,
        dir.path().display()
    ))
    .map_err(|e| e.to_string())?;
    let (report, stats) = run_experiment(&cfg, &|_, _| {}).map_err(|e| e.to_string())?;
    ensure(stats.failed == 0, || format!("{} cells failed", stats.failed))?;

    let mut means: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    let mut points = (Vec::new(), Vec::new());
    for c in &report.cells {
        let biasprop::runner::ModelSpec::Ngram { n, smoothing } = &c.cell.model else { continue };
        let b = c.score().ok_or_else(|| format!("{} has no score", c.key))?;
        means.entry((smoothing.name(), *n)).or_default().push(b);
        if smoothing.name() == "laplace" {
            points.0.push(*n as f64);
            points.1.push(b);
        }
    }
    let mean = |s: &str, n: usize| {
        let v = &means[&(s, n)];
        v.iter().sum::<f64>() / v.len() as f64
    };
    let lap: Vec<f64> = [2, 4, 6].iter().map(|&n| mean("laplace", n)).collect();
    ensure(lap[0] >= lap[1] && lap[1] >= lap[2], || format!("Laplace means {lap:?} increase"))?;
    let rho = spearman_rho(&points.0, &points.1).map_err(|e| e.to_string())?;
    ensure(rho.statistic <= -0.5, || format!("Spearman rho {} > -0.5", rho.statistic))?;
    let (kn6, lap6) = ((mean("kneser-ney", 6) - 0.5).abs(), (lap[2] - 0.5).abs());
    ensure(kn6 < lap6, || format!("|KN - 0.5| = {kn6:.4} not below |Laplace - 0.5| = {lap6:.4} at n=6"))?;
    Ok(format!(
        "Laplace means n=2,4,6: {:.4} {:.4} {:.4}; rho = {:.3} over {} cells; n=6 |B-0.5| KN {kn6:.4} < Laplace {lap6:.4}",
        lap[0],
        lap[1],
        lap[2],
        rho.statistic,
        points.0.len()
    ))
}

// ---------------------------------------------------------------- C8

const C8_GRID: &str = r#"
seeds = [0]
injection = [0.0, 0.33, 1.0]

[[corpora]]
label = "desk"
generate = { sentences = 2000, seed = 81 }

[bias_set]
generate = { sentences = 1000, seed = 82 }

[pairs]
generate_seed = 83

[ngram]
orders = [2, 3, 4, 5, 6]
smoothing = ["laplace", "add-lambda", "kneser-ney"]

[transformer]
layers = [2]
heads = [4]
attention = ["soft", "sparse"]

# ten epochs at 1e-4 leave a desk-sized corpus far from converged
[transformer.train]
lr = 1e-3
"#;

fn c8_injection_slope() -> std::result::Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = format!("cache_dir = \"{}\"\n{C8_GRID}", dir.path().display());
    let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
    let (report, stats) = run_experiment(&cfg, &|_, _| {}).map_err(|e| e.to_string())?;
    ensure(stats.failed == 0, || format!("{} cells failed", stats.failed))?;
    let tf = report.slope("transformer").ok_or("no transformer slope")?;
    let ng = report.slope("ngram").ok_or("no n-gram slope")?;
    let detail = format!(
        "slope transformer {tf:.4} (soft {:.4}, sparse {:.4}) vs n-gram {ng:.4}",
        report.slope("soft").unwrap_or(f64::NAN),
        report.slope("sparse").unwrap_or(f64::NAN)
    );
    ensure(tf >= ng, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- C9

fn c9_stats() -> std::result::Result<String, String> {
    use stats_battery::{Test, BONFERRONI, CASES};
    let mut worst = (0.0f64, 0.0f64);
    for (i, c) in CASES.iter().enumerate() {
        let r: StatResult = match c.test {
            Test::Spearman => spearman_rho(c.a, c.b),
            Test::Paired => paired_ttest(c.a, c.b).map(|r| r.result),
            Test::Welch => welch_ttest(c.a, c.b),
        }
        .map_err(|e| format!("case {i}: {e}"))?;
        let es = (r.statistic - c.statistic).abs() / c.statistic.abs().max(1.0);
        let ep = (r.p_value - c.p_value).abs();
        let ed = (r.dof - c.dof).abs() / c.dof.abs().max(1.0);
        worst = (worst.0.max(es), worst.1.max(ep));
        ensure(es <= 1e-10 && ed <= 1e-10, || {
            format!("case {i}: statistic {} dof {} vs {} {}", r.statistic, r.dof, c.statistic, c.dof)
        })?;
        ensure(ep <= 1e-8, || format!("case {i}: p {} vs {}", r.p_value, c.p_value))?;
    }
    for (i, (ps, adj)) in BONFERRONI.iter().enumerate() {
        let r = bonferroni(ps, 0.05).map_err(|e| e.to_string())?;
        for (j, (got, want)) in r.adjusted.iter().zip(adj.iter()).enumerate() {
            worst.1 = worst.1.max((got - want).abs());
            ensure(close(*got, *want, 1e-12), || format!("bonferroni {i}.{j}: {got} vs {want}"))?;
            ensure(r.reject[j] == (*want < 0.05), || format!("bonferroni {i}.{j}: reject flag"))?;
        }
    }
    Ok(format!(
        "{} cases; max statistic rel err {:.1e}, max p abs err {:.1e}",
        CASES.len() + BONFERRONI.len(),
        worst.0,
        worst.1
    ))
}

// ---------------------------------------------------------------- C10

fn c10_cooccur() -> std::result::Result<String, String> {
    let corpus = Corpus::from_lines(
        "probe",
        &[
            "He is a doctor.",
            "His brother is an engineer, and he met a nurse, a nurse!",
            "He and she both know the janitor.",
            "She is a nurse and a doctor.",
            "Her mother was a cashier, her father a professor, and her aunt a nurse.",
            "She said the engineer and the janitor left.",
        ],
    );
    let lex = GroupLexicon::default();
    let t = count_cooccurrence(&corpus, &lex);
    let want_n: [(&str, [u64; 6]); 2] = [("male", [1, 1, 0, 1, 0, 1]), ("female", [1, 1, 1, 2, 1, 2])];
    let words = ["doctor", "engineer", "professor", "nurse", "cashier", "janitor"];
    for (g, row) in want_n {
        for (w, n) in words.iter().zip(row) {
            ensure(t.count(g, w) == Some(n), || format!("N({g}, {w}) = {:?}, expected {n}", t.count(g, w)))?;
        }
    }
    let p = conditional_prob(&t);
    for (g, row, total) in [("male", want_n[0].1, 4.0), ("female", want_n[1].1, 8.0)] {
        for (w, n) in words.iter().zip(row) {
            let want = n as f64 / total;
            ensure(p.prob(g, w) == Some(want), || format!("P({w}|{g}) = {:?}, expected {want}", p.prob(g, w)))?;
        }
    }
    let gap = default_gap(&p, &lex).map_err(|e| e.to_string())?;
    let want_gap = [("high-prestige", 0.5, 0.375, 0.125), ("low-prestige", 0.5, 0.625, -0.125)];
    for (g, (class, first, second, d)) in gap.iter().zip(want_gap) {
        ensure(g.class == class && g.first == first && g.second == second && g.gap == d, || format!("{g:?}"))?;
    }

    let swapped_lex = GroupLexicon::new(vec![lex.groups[1].clone(), lex.groups[0].clone()], lex.contexts.clone())
        .map_err(|e| e.to_string())?;
    let ps = conditional_prob(&count_cooccurrence(&corpus, &swapped_lex));
    let swapped = default_gap(&ps, &swapped_lex).map_err(|e| e.to_string())?;
    let reversed = prestige_gap(&p, &lex, "female", "male").map_err(|e| e.to_string())?;
    for ((a, b), c) in gap.iter().zip(&swapped).zip(&reversed) {
        ensure(b.gap == -a.gap && c.gap == -a.gap, || format!("swap: {a:?} vs {b:?} / {c:?}"))?;
        ensure(b.first == a.second && b.second == a.first, || format!("swap masses: {a:?} vs {b:?}"))?;
    }
    Ok("N, P(c|g) and gaps exact; swapping the groups negates every gap".into())
}

// ---------------------------------------------------------------- C11

fn c11_config(cache: &std::path::Path) -> std::result::Result<ExperimentConfig, String> {
    ExperimentConfig::from_toml(&format!(
        r#"
cache_dir = "{}"
seeds = [0, 1]
injection = [0.0, 1.0]

[[corpora]]
label = "a"
generate = {{ sentences = 300, seed = 111 }}

[bias_set]
generate = {{ sentences = 150, seed = 112 }}

[pairs]
generate_seed = 113
generate_counts = [8, 6, 4, 4, 3, 3, 2, 2, 2]

[ngram]
orders = [3]
smoothing = ["laplace", "kneser-ney"]

[transformer]
layers = [2]
heads = [4]
attention = ["soft", "sparse"]

[transformer.model]
embed_dim = 32
head_dim = 8
ffn_dim = 64
max_positions = 64
bpe_vocab = 300

[transformer.train]
epochs = 2
"#,
        cache.display()
    ))
    .map_err(|e| e.to_string())
}

fn c11_determinism() -> std::result::Result<String, String> {
    let run = |cache: &std::path::Path| -> std::result::Result<(ExperimentReport, usize), String> {
        let (r, s) = run_experiment(&c11_config(cache)?, &|_, _| {}).map_err(|e| e.to_string())?;
        ensure(s.failed == 0, || format!("{} cells failed", s.failed))?;
        Ok((r, s.trained))
    };
    let (d1, d2) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let (first, trained) = run(d1.path())?;
    let (second, retrained) = run(d2.path())?;
    ensure(trained == retrained && trained > 0, || format!("trained {trained} vs {retrained}"))?;
    for (a, b) in first.cells.iter().zip(&second.cells) {
        let (x, y) = (a.score().ok_or("missing score")?, b.score().ok_or("missing score")?);
        ensure(a.key == b.key && x.to_bits() == y.to_bits(), || format!("{}: {x} vs {y}", a.key))?;
    }
    let json = |r: &ExperimentReport| serde_json::to_string_pretty(r).map_err(|e| e.to_string());
    ensure(json(&first)? == json(&second)?, || "report JSON differs between fresh runs".into())?;
    let (cached, _) = run(d1.path())?;
    ensure(json(&first)? == json(&cached)?, || "report JSON differs after cache reload".into())?;
    Ok(format!("{} cells retrained bit-identically; report JSON identical fresh and cached", first.cells.len()))
}

// ---------------------------------------------------------------- C12

fn c12_large_preset() -> std::result::Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_biasprop"))
        .args(["train-transformer", "--preset", "large", "--vocab", "30522", "--dry-run"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let printed: usize = stdout
        .lines()
        .find_map(|l| l.strip_prefix("parameters\t"))
        .ok_or("no parameter line")?
        .trim()
        .parse()
        .map_err(|e| format!("{e}"))?;
    let cfg = TransformerConfig::large(30522);
    ensure(cfg.window_normalizer == WindowNormalizer::Sparsemax, || "preset normalizer".into())?;
    let built = TransformerLM::zeros(cfg).map_err(|e| e.to_string())?.param_count();
    ensure(printed == built, || format!("CLI printed {printed}, model has {built}"))?;
    ensure((12_000_000..=14_000_000).contains(&printed), || format!("{printed} parameters"))?;
    Ok(format!("{printed} parameters at vocab 30522"))
}

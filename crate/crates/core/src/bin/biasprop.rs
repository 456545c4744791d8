use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use biasprop::bias_eval::{bias_score, load_pairs, write_pairs, BiasResult, NgramScorer, TransformerScorer};
use biasprop::cooccur::{conditional_prob, count_cooccurrence, default_gap, write_counts_csv, write_gap_csv, GroupLexicon};
use biasprop::corpus::{corpus_stats, load_corpus, load_synthetic, mix_bias, InjectionLevel};
use biasprop::ngram::{NgramModel, SmoothingSpec};
use biasprop::runner::{
    emit_report, run_experiment, CellOutcome, CellStatus, ExperimentConfig, ExperimentData, ExperimentGrid,
    ExperimentReport, Runner,
};
use biasprop::stats::{bonferroni, paired_ttest, spearman_rho, welch_ttest, StatResult};
use biasprop::synth;
use biasprop::tokenize::{BpeModel, DEFAULT_VOCAB_SIZE};
use biasprop::transformer::{
    load_checkpoint, save_checkpoint, train, AttentionKind, CheckpointMeta, Precision, TrainSpec, TransformerConfig,
    TransformerLM,
};
use biasprop::{Error, Result};

#[derive(Parser)]
#[command(name = "biasprop", version, about = "Measure how injected stereotypes propagate into language models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a one-sentence-per-line corpus and print its statistics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label: Option<String>,
        /// Write the cleaned corpus (blank lines dropped) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mix a fraction of a stereotype set into a base corpus.
    Mix {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Injection level in [0, 1].
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-line `base` / `synthetic` tags.
        #[arg(long)]
        origins: Option<PathBuf>,
    },
    /// Count n-grams; `.bin` output is binary, anything else text.
    TrainNgram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a BPE tokenizer and a transformer, or just report its size.
    TrainTransformer(TrainTransformerArgs),
    /// Score minimal pairs with a trained model.
    Eval(EvalArgs),
    /// Significance tests over columns of a CSV file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        test: TestKind,
        /// Columns to compare pairwise; defaults to every column.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group/context co-occurrence counts and prestige gaps per corpus.
    Cooccur {
        #[arg(long = "corpus", required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score every cell of an experiment config.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// List the cells without running them.
        #[arg(long)]
        dry_run: bool,
    },
    /// Assemble a report from cached cells without training.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write generated stand-in data: base corpus, stereotype set, pairs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        base_sentences: usize,
        #[arg(long, default_value_t = 1_000)]
        bias_sentences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainTransformerArgs {
    #[arg(long, required_unless_present = "dry_run")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grid")]
    preset: Preset,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, value_enum, default_value = "soft")]
    attention: Attention,
    #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
    vocab: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum, default_value = "f32")]
    precision: Prec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path; the tokenizer is written next to it as `.bpe`.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Build the model, print its parameter count and stop.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// n-gram model file.
    #[arg(long, conflicts_with = "checkpoint")]
    ngram: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "kneser-ney")]
    smoothing: Smoothing,
    #[arg(long, default_value_t = SmoothingSpec::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Transformer checkpoint; its tokenizer is read from the `.bpe` sibling.
    #[arg(long, required_unless_present = "ngram")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// Full result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Grid,
    Large,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attention {
    Soft,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prec {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Smoothing {
    Laplace,
    AddLambda,
    KneserNey,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Spearman,
    Paired,
    Welch,
    /// Adjust each column's p-values.
    Bonferroni,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn label_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned())
}

fn tokenizer_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("bpe")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Ingest { input, label, out } => {
            let c = load_corpus(&input, &label.unwrap_or_else(|| label_of(&input)))?;
            let s = corpus_stats(&c);
            println!("label\t{}", c.label);
            println!("sentences\t{}", s.sentence_count);
            println!("avg_words\t{:.3}", s.avg_sentence_length);
            println!("vocab\t{}", s.vocab_size);
            println!("digest\t{}", c.digest());
            if let Some(out) = out {
                c.write(&out)?;
            }
        }
        Cmd::Mix { base, synthetic, categories, level, seed, out, origins } => {
            let b = load_corpus(&base, &label_of(&base))?;
            let s = load_synthetic(&synthetic, categories.as_deref(), &label_of(&synthetic))?;
            let m = mix_bias(&b, &s, InjectionLevel::new(level)?, seed)?;
            m.write(&out)?;
            if let Some(o) = origins {
                m.write_origins(&o)?;
            }
            println!("{} sentences, {} synthetic", m.len(), m.count_origin(biasprop::corpus::Origin::Synthetic));
        }
        Cmd::TrainNgram { corpus, n, out } => {
            let c = load_corpus(&corpus, &label_of(&corpus))?;
            let m = NgramModel::train(&c, n)?;
            m.save(&out)?;
            println!("order {n}, vocab {}, {} n-grams", m.vocab_size(), m.num_ngrams());
            for o in &m.discount_report().orders {
                println!("order {} discounts {:?}{}", o.order, o.d, if o.fallback { " (fallback)" } else { "" });
            }
        }
        Cmd::TrainTransformer(a) => train_transformer(a)?,
        Cmd::Eval(a) => {
            let pairs = load_pairs(&a.pairs)?;
            let r = match (&a.ngram, &a.checkpoint) {
                (Some(path), _) => {
                    let model = NgramModel::load(path)?;
                    let smoothing = match a.smoothing {
                        Smoothing::Laplace => SmoothingSpec::Laplace,
                        Smoothing::AddLambda => SmoothingSpec::add_lambda(a.lambda)?,
                        Smoothing::KneserNey => SmoothingSpec::kneser_ney(),
                    };
                    bias_score(&NgramScorer { model: &model, smoothing }, &pairs)?
                }
                (None, Some(ckpt)) => {
                    let (model, meta) = load_checkpoint(ckpt)?;
                    let tok = BpeModel::load(&a.tokenizer.clone().unwrap_or_else(|| tokenizer_path(ckpt)))?;
                    if tok.fingerprint() != meta.vocab_fingerprint {
                        return Err(Error::Config("tokenizer does not match the checkpoint".into()));
                    }
                    bias_score(&TransformerScorer { model: &model, tokenizer: &tok }, &pairs)?
                }
                (None, None) => return Err(Error::Config("need --ngram or --checkpoint".into())),
            };
            print_bias(&r);
            if let Some(out) = a.out {
                std::fs::write(&out, serde_json::to_string_pretty(&r)?).map_err(|e| Error::io(&out, e))?;
            }
        }
        Cmd::Stats { input, test, columns, alpha, out } => {
            let table = stats_table(&input, test, &columns, alpha)?;
            match out {
                Some(p) => std::fs::write(&p, table).map_err(|e| Error::io(&p, e))?,
                None => print!("{table}"),
            }
        }
        Cmd::Cooccur { corpora, lexicon, out } => {
            let lex = match lexicon {
                Some(p) => GroupLexicon::load(&p)?,
                None => GroupLexicon::default(),
            };
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut gaps = Vec::new();
            for path in &corpora {
                let label = label_of(path);
                let c = load_corpus(path, &label)?;
                let t = count_cooccurrence(&c, &lex);
                let p = conditional_prob(&t);
                let f = out.join(format!("counts_{label}.csv"));
                write_counts_csv(std::fs::File::create(&f).map_err(|e| Error::io(&f, e))?, &t, &p)?;
                let g = default_gap(&p, &lex)?;
                for x in &g {
                    println!("{label}\t{}\t{:+.6}", x.class, x.gap);
                }
                gaps.push((label, g));
            }
            let f = out.join("gap.csv");
            write_gap_csv(std::fs::File::create(&f).map_err(|e| Error::io(&f, e))?, &gaps)?;
        }
        Cmd::Grid { config, out, workers, dry_run } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if dry_run {
                let grid = ExperimentGrid::from_config(&cfg);
                for c in &grid.cells {
                    println!("{}\t{}\t{:?}\t{}\t{}", c.model.label(), c.corpus, c.sample, c.injection, c.seed);
                }
                let (ng, tf) = grid.main_counts();
                eprintln!("{} cells ({ng} n-gram, {tf} transformer in the main grid)", grid.len());
                return Ok(true);
            }
            let start = Instant::now();
            let progress = |o: &CellOutcome, cached: bool| {
                let what = match &o.status {
                    CellStatus::Done(r) => format!("B={:.4}{}", r.score, if cached { " (cached)" } else { "" }),
                    CellStatus::Failed { error } => format!("FAILED: {error}"),
                };
                eprintln!(
                    "[{:>7.1}s] {} {} inj={} seed={} {:?}: {what}",
                    start.elapsed().as_secs_f64(),
                    o.cell.model.label(),
                    o.cell.corpus,
                    o.cell.injection,
                    o.cell.seed,
                    o.cell.sample
                );
            };
            let (report, stats) = run_experiment(&cfg, &progress)?;
            emit_report(&report, &out)?;
            eprintln!("{} trained, {} cached, {} failed", stats.trained, stats.cached, stats.failed);
            return Ok(report.failed == 0);
        }
        Cmd::Report { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let data = ExperimentData::load(&cfg)?;
            let grid = ExperimentGrid::from_config(&cfg);
            let cells = Runner::new(&cfg, &data).collect(&grid.cells);
            let report = ExperimentReport::build(&cfg, cells);
            emit_report(&report, &out)?;
            eprintln!("{} cells, {} missing or failed", report.cells.len(), report.failed);
            return Ok(report.failed == 0);
        }
        Cmd::Synth { out, base_sentences, bias_sentences, seed } => {
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            synth::base_corpus("base", base_sentences, seed).write(&out.join("base.txt"))?;
            let bias = synth::stereotype_set("bias", bias_sentences, seed.wrapping_add(1));
            bias.write(&out.join("bias.txt"))?;
            let cats = out.join("bias.categories");
            let mut f = std::fs::File::create(&cats).map_err(|e| Error::io(&cats, e))?;
            for s in &bias.sentences {
                writeln!(f, "{}", s.category.as_deref().unwrap_or("")).map_err(|e| Error::io(&cats, e))?;
            }
            write_pairs(&out.join("pairs.csv"), &synth::pair_set(synth::REFERENCE_CATEGORY_COUNTS, seed.wrapping_add(2)))?;
        }
    }
    Ok(true)
}

fn train_transformer(a: TrainTransformerArgs) -> Result<()> {
    let attention = match a.attention {
        Attention::Soft => AttentionKind::Softmax,
        Attention::Sparse => AttentionKind::SparseWindow,
    };
    let config_for = |vocab: usize| match a.preset {
        Preset::Grid => TransformerConfig::grid(vocab, a.layers, a.heads, attention),
        Preset::Large => TransformerConfig { attention, ..TransformerConfig::large(vocab) },
    };
    if a.dry_run {
        let cfg = config_for(a.vocab);
        let model = TransformerLM::zeros(cfg)?;
        println!("parameters\t{}", model.param_count());
        for b in model.blocks() {
            println!("{}\t{}x{}", b.name, b.rows, b.cols);
        }
        return Ok(());
    }
    let (Some(corpus), Some(out)) = (a.corpus, a.out) else {
        return Err(Error::Config("--corpus and --out are required".into()));
    };
    let c = load_corpus(&corpus, &label_of(&corpus))?;
    let tok = BpeModel::train(&c, a.vocab)?;
    let cfg = config_for(tok.vocab_size());
    let mut model = TransformerLM::new(cfg.clone(), a.seed)?;
    println!("parameters\t{}", model.param_count());
    let d = TrainSpec::default();
    let spec = TrainSpec {
        epochs: a.epochs,
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        lr: a.lr.unwrap_or(d.lr),
        seed: a.seed,
        precision: match a.precision {
            Prec::F32 => Precision::F32,
            Prec::F64 => Precision::F64,
        },
        ..d
    };
    let report = train(&mut model, &c, &tok, &spec)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {}\tloss {l:.5}", i + 1);
    }
    let meta = CheckpointMeta { config: cfg, vocab_fingerprint: tok.fingerprint(), seed: a.seed };
    save_checkpoint(&out, &model, &meta)?;
    tok.save(&tokenizer_path(&out))?;
    if let Some(p) = a.loss_csv {
        report.write_loss_csv(&p)?;
    }
    Ok(())
}

fn print_bias(r: &BiasResult) {
    println!("bias_score\t{:.6}", r.overall);
    println!("scored\t{}\tskipped\t{}", r.scored, r.skipped);
    for c in &r.per_category {
        let s = c.score.map_or("-".into(), |s| format!("{s:.6}"));
        println!("{}\t{s}\t{} pairs", c.category.name(), c.pairs);
    }
}

fn stats_table(input: &Path, test: TestKind, columns: &[String], alpha: f64) -> Result<String> {
    let mut rdr = csv::Reader::from_path(input)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (row, rec) in rdr.records().enumerate() {
        for (i, field) in rec?.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let v = field
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("row {}: {field:?} is not a number", row + 2)))?;
            cols[i].push(v);
        }
    }
    let pick: Vec<usize> = if columns.is_empty() {
        (0..header.len()).collect()
    } else {
        columns
            .iter()
            .map(|c| {
                header.iter().position(|h| h == c).ok_or_else(|| Error::Config(format!("no column {c:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut out = String::new();
    if let TestKind::Bonferroni = test {
        out.push_str("column,row,p_value,p_adjusted,reject\n");
        for &i in &pick {
            let b = bonferroni(&cols[i], alpha)?;
            for (r, p) in cols[i].iter().enumerate() {
                out.push_str(&format!("{},{},{p},{},{}\n", header[i], r + 1, b.adjusted[r], b.reject[r]));
            }
        }
        return Ok(out);
    }
    let mut rows: Vec<(usize, usize, StatResult)> = Vec::new();
    for (x, &i) in pick.iter().enumerate() {
        for &j in &pick[x + 1..] {
            let r = match test {
                TestKind::Spearman => spearman_rho(&cols[i], &cols[j])?,
                TestKind::Paired => paired_ttest(&cols[i], &cols[j])?.result,
                TestKind::Welch => welch_ttest(&cols[i], &cols[j])?,
                TestKind::Bonferroni => unreachable!(),
            };
            rows.push((i, j, r));
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("need at least two columns".into()));
    }
    let ps: Vec<f64> = rows.iter().map(|r| r.2.p_value).collect();
    let adj = bonferroni(&ps, alpha)?;
    out.push_str("first,second,statistic,dof,n,p_value,p_adjusted,reject,marker\n");
    for (k, (i, j, r)) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            header[*i],
            header[*j],
            r.statistic,
            r.dof,
            r.n,
            r.p_value,
            adj.adjusted[k],
            adj.reject[k],
            r.marker()
        ));
    }
    Ok(out)
}

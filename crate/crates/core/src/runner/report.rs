use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::grid::{CellOutcome, CellStatus, ModelSpec, Sample};
use super::fit_injection_regression;
use crate::bias_eval::{mean_abs_deviation, Category};
use crate::error::{Error, Result};
use crate::stats::{bonferroni, paired_ttest, spearman_rho, welch_ttest, Direction, Significance};

/// Model columns shared by the flat report rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelCols {
    pub family: String,
    pub smoothing: Option<String>,
    pub n: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
}

impl From<&ModelSpec> for ModelCols {
    fn from(m: &ModelSpec) -> Self {
        match *m {
            ModelSpec::Ngram { n, smoothing } => ModelCols {
                family: "ngram".into(),
                smoothing: Some(smoothing.name().into()),
                n: Some(n),
                ..Default::default()
            },
            ModelSpec::Transformer { layers, heads, attention } => ModelCols {
                family: attention.name().into(),
                layers: Some(layers),
                heads: Some(heads),
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// `all` or a corpus label.
    pub scope: String,
    #[serde(flatten)]
    pub model: ModelCols,
    pub injection: f64,
    pub mean: f64,
    /// Sample standard deviation; absent below two values.
    pub std: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanRow {
    pub family: String,
    /// Smoothing name for n-gram rows, empty for transformer rows.
    pub group: String,
    pub injection: f64,
    /// `n`, `layers` or `heads`.
    pub variable: String,
    pub points: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub family: String,
    pub injection: f64,
    pub from: String,
    pub to: String,
    pub pairs: usize,
    pub mean_from: Option<f64>,
    pub mean_to: Option<f64>,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub direction: Option<Direction>,
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    /// `ngram`, `soft`, `sparse` or `transformer` (both attentions).
    pub family: String,
    pub points: usize,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadRow {
    pub family: String,
    pub cells: usize,
    pub mad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMeanRow {
    pub family: String,
    pub category: Category,
    pub cells: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTestRow {
    pub family: String,
    pub first: Category,
    pub second: Category,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    /// Bonferroni-adjusted over the family's testable pairs.
    pub p_adjusted: Option<f64>,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub label: String,
    #[serde(flatten)]
    pub model: ModelCols,
    /// Subsample size, or subset index for disjoint rows.
    pub sample: usize,
    pub count: usize,
    pub mean: Option<f64>,
    pub synthetic_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub label: String,
    #[serde(flatten)]
    pub model: ModelCols,
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub corpora: Vec<String>,
    pub injection: Vec<f64>,
    pub failed: usize,
    pub cells: Vec<CellOutcome>,
    pub ngram_table: Vec<AggregateRow>,
    pub transformer_table: Vec<AggregateRow>,
    pub spearman: Vec<SpearmanRow>,
    pub paired: Vec<PairedRow>,
    pub regression: Vec<RegressionRow>,
    pub mad: Vec<MadRow>,
    pub category_means: Vec<CategoryMeanRow>,
    pub category_tests: Vec<CategoryTestRow>,
    pub scale: Vec<ProtocolRow>,
    pub disjoint: Vec<ProtocolRow>,
    pub disjoint_spread: Vec<SpreadRow>,
}

fn mean_std(x: &[f64]) -> (f64, Option<f64>) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.len() > 1).then(|| (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (m, sd)
}

fn uniq<T: PartialEq + Clone>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in it {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn marker(p: Option<f64>) -> String {
    p.map_or("", |p| Significance::of(p).marker()).to_string()
}

/// Main-grid cells that finished, with their scores.
fn main_cells(cells: &[CellOutcome]) -> Vec<(&CellOutcome, f64)> {
    cells
        .iter()
        .filter(|c| c.cell.sample == Sample::Full)
        .filter_map(|c| c.score().map(|s| (c, s)))
        .collect()
}

fn aggregate(cells: &[(&CellOutcome, f64)], corpora: &[String], ngram: bool) -> Vec<AggregateRow> {
    let pick: Vec<_> = cells
        .iter()
        .filter(|(c, _)| matches!(c.cell.model, ModelSpec::Ngram { .. }) == ngram)
        .collect();
    let models = uniq(pick.iter().map(|(c, _)| c.cell.model));
    let levels = uniq(pick.iter().map(|(c, _)| c.cell.injection.to_bits()));
    let scopes = std::iter::once(None).chain(corpora.iter().map(Some));
    let mut rows = Vec::new();
    for scope in scopes {
        for m in &models {
            for &lv in &levels {
                let x: Vec<f64> = pick
                    .iter()
                    .filter(|(c, _)| {
                        c.cell.model == *m
                            && c.cell.injection.to_bits() == lv
                            && scope.is_none_or(|s| &c.cell.corpus == s)
                    })
                    .map(|(_, s)| *s)
                    .collect();
                if x.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&x);
                rows.push(AggregateRow {
                    scope: scope.cloned().unwrap_or_else(|| "all".into()),
                    model: m.into(),
                    injection: f64::from_bits(lv),
                    mean,
                    std,
                    count: x.len(),
                });
            }
        }
    }
    rows
}

fn spearman_rows(cells: &[(&CellOutcome, f64)]) -> Vec<SpearmanRow> {
    let mut rows = Vec::new();
    let levels = uniq(cells.iter().map(|(c, _)| c.cell.injection.to_bits()));
    let smoothings = uniq(cells.iter().filter_map(|(c, _)| match c.cell.model {
        ModelSpec::Ngram { smoothing, .. } => Some(smoothing),
        _ => None,
    }));
    let mut push = |family: &str, group: String, lv: u64, variable: &str, pts: Vec<(f64, f64)>| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let r = spearman_rho(&x, &y).ok();
        rows.push(SpearmanRow {
            family: family.into(),
            group,
            injection: f64::from_bits(lv),
            variable: variable.into(),
            points: x.len(),
            rho: r.map(|r| r.statistic),
            p_value: r.map(|r| r.p_value),
            marker: marker(r.map(|r| r.p_value)),
        });
    };
    for &sm in &smoothings {
        for &lv in &levels {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|(c, _)| c.cell.injection.to_bits() == lv)
                .filter_map(|(c, s)| match c.cell.model {
                    ModelSpec::Ngram { n, smoothing } if smoothing == sm => Some((n as f64, *s)),
                    _ => None,
                })
                .collect();
            if !pts.is_empty() {
                push("ngram", sm.name().into(), lv, "n", pts);
            }
        }
    }
    for family in ["soft", "sparse"] {
        for &lv in &levels {
            for variable in ["layers", "heads"] {
                let pts: Vec<(f64, f64)> = cells
                    .iter()
                    .filter(|(c, _)| c.cell.injection.to_bits() == lv && c.cell.model.family() == family)
                    .filter_map(|(c, s)| match c.cell.model {
                        ModelSpec::Transformer { layers, heads, .. } => {
                            Some((if variable == "layers" { layers } else { heads } as f64, *s))
                        }
                        _ => None,
                    })
                    .collect();
                if !pts.is_empty() {
                    push(family, String::new(), lv, variable, pts);
                }
            }
        }
    }
    rows
}

/// Consecutive corpora in config order, matched on model, injection and seed.
fn paired_rows(cells: &[(&CellOutcome, f64)], corpora: &[String]) -> Vec<PairedRow> {
    let mut rows = Vec::new();
    let levels = uniq(cells.iter().map(|(c, _)| c.cell.injection.to_bits()));
    let families = uniq(cells.iter().map(|(c, _)| c.cell.model.family()));
    for family in families {
        for &lv in &levels {
            for w in corpora.windows(2) {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (c, s) in cells.iter().filter(|(c, _)| {
                    c.cell.model.family() == family && c.cell.injection.to_bits() == lv && c.cell.corpus == w[0]
                }) {
                    let other = cells.iter().find(|(o, _)| {
                        o.cell.corpus == w[1]
                            && o.cell.model == c.cell.model
                            && o.cell.injection.to_bits() == lv
                            && o.cell.seed == c.cell.seed
                    });
                    if let Some((_, t)) = other {
                        a.push(*s);
                        b.push(*t);
                    }
                }
                let r = paired_ttest(&a, &b).ok();
                rows.push(PairedRow {
                    family: family.into(),
                    injection: f64::from_bits(lv),
                    from: w[0].clone(),
                    to: w[1].clone(),
                    pairs: a.len(),
                    mean_from: r.map(|r| r.mean_a),
                    mean_to: r.map(|r| r.mean_b),
                    t: r.map(|r| r.result.statistic),
                    p_value: r.map(|r| r.result.p_value),
                    direction: r.map(|r| r.direction),
                    marker: marker(r.map(|r| r.result.p_value)),
                });
            }
        }
    }
    rows
}

fn family_match(family: &str, m: &ModelSpec) -> bool {
    family == m.family() || (family == "transformer" && matches!(m, ModelSpec::Transformer { .. }))
}

const FAMILIES: [&str; 4] = ["ngram", "soft", "sparse", "transformer"];

fn regression_rows(cells: &[(&CellOutcome, f64)]) -> Vec<RegressionRow> {
    FAMILIES
        .iter()
        .filter_map(|&family| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|(c, _)| family_match(family, &c.cell.model))
                .map(|(c, s)| (c.cell.injection, *s))
                .collect();
            if pts.is_empty() {
                return None;
            }
            let fit = fit_injection_regression(&pts).ok();
            Some(RegressionRow {
                family: family.into(),
                points: pts.len(),
                slope: fit.map(|f| f.0),
                intercept: fit.map(|f| f.1),
            })
        })
        .collect()
}

fn mad_rows(cells: &[(&CellOutcome, f64)]) -> Vec<MadRow> {
    FAMILIES
        .iter()
        .filter_map(|&family| {
            let x: Vec<f64> =
                cells.iter().filter(|(c, _)| family_match(family, &c.cell.model)).map(|(_, s)| *s).collect();
            (!x.is_empty()).then(|| MadRow { family: family.into(), cells: x.len(), mad: mean_abs_deviation(&x).ok() })
        })
        .collect()
}

fn category_rows(cells: &[(&CellOutcome, f64)]) -> (Vec<CategoryMeanRow>, Vec<CategoryTestRow>) {
    let mut means = Vec::new();
    let mut tests = Vec::new();
    for family in ["ngram", "soft", "sparse"] {
        let fam: Vec<_> = cells.iter().filter(|(c, _)| family_match(family, &c.cell.model)).collect();
        if fam.is_empty() {
            continue;
        }
        let per_cat: Vec<Vec<f64>> = Category::ALL
            .iter()
            .map(|cat| {
                fam.iter()
                    .filter_map(|(c, _)| c.result().and_then(|r| r.per_category.get(cat.index())?.score))
                    .collect()
            })
            .collect();
        for (cat, x) in Category::ALL.iter().zip(&per_cat) {
            let (mean, std) = if x.is_empty() { (None, None) } else { let (m, s) = mean_std(x); (Some(m), s) };
            means.push(CategoryMeanRow { family: family.into(), category: *cat, cells: x.len(), mean, std });
        }
        let mut fam_tests = Vec::new();
        for i in 0..Category::ALL.len() {
            for j in i + 1..Category::ALL.len() {
                let r = welch_ttest(&per_cat[i], &per_cat[j]).ok().filter(|r| r.p_value.is_finite());
                fam_tests.push(CategoryTestRow {
                    family: family.into(),
                    first: Category::ALL[i],
                    second: Category::ALL[j],
                    t: r.map(|r| r.statistic),
                    p_value: r.map(|r| r.p_value),
                    p_adjusted: None,
                    reject: false,
                });
            }
        }
        let ps: Vec<f64> = fam_tests.iter().filter_map(|t| t.p_value).collect();
        if let Ok(adj) = bonferroni(&ps, 0.05) {
            for (k, t) in fam_tests.iter_mut().filter(|t| t.p_value.is_some()).enumerate() {
                t.p_adjusted = Some(adj.adjusted[k]);
                t.reject = adj.reject[k];
            }
        }
        tests.extend(fam_tests);
    }
    (means, tests)
}

fn protocol_rows(cells: &[CellOutcome], disjoint: bool) -> Vec<ProtocolRow> {
    let pick: Vec<&CellOutcome> = cells
        .iter()
        .filter(|c| match c.cell.sample {
            Sample::Full => false,
            Sample::Subsample { .. } => !disjoint,
            Sample::Disjoint { .. } => disjoint,
        })
        .collect();
    let keys = uniq(pick.iter().map(|c| (c.cell.model, c.cell.sample)));
    keys.into_iter()
        .map(|(model, sample)| {
            let group: Vec<&CellOutcome> =
                pick.iter().copied().filter(|c| c.cell.model == model && c.cell.sample == sample).collect();
            let scores: Vec<f64> = group.iter().filter_map(|c| c.score()).collect();
            let shares: Vec<f64> = group
                .iter()
                .filter_map(|c| c.result())
                .filter(|r| r.train.train_sentences > 0)
                .map(|r| r.train.synthetic_sentences as f64 / r.train.train_sentences as f64)
                .collect();
            let avg = |x: &[f64]| (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64);
            ProtocolRow {
                label: model.label(),
                model: (&model).into(),
                sample: match sample {
                    Sample::Full => 0,
                    Sample::Subsample { size } => size,
                    Sample::Disjoint { index, .. } => index,
                },
                count: scores.len(),
                mean: avg(&scores),
                synthetic_share: avg(&shares),
            }
        })
        .collect()
}

fn spread_rows(rows: &[ProtocolRow]) -> Vec<SpreadRow> {
    uniq(rows.iter().map(|r| r.label.clone()))
        .into_iter()
        .map(|label| {
            let group: Vec<&ProtocolRow> = rows.iter().filter(|r| r.label == label).collect();
            let x: Vec<f64> = group.iter().filter_map(|r| r.mean).collect();
            let (mean, std) = if x.is_empty() { (None, None) } else { let (m, s) = mean_std(&x); (Some(m), s) };
            let range = (!x.is_empty()).then(|| {
                x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min)
            });
            SpreadRow { label, model: group[0].model.clone(), count: x.len(), mean, std, range }
        })
        .collect()
}

impl ExperimentReport {
    pub fn build(cfg: &ExperimentConfig, cells: Vec<CellOutcome>) -> Self {
        let corpora: Vec<String> = cfg.corpora.iter().map(|c| c.label.clone()).collect();
        let main = main_cells(&cells);
        let (category_means, category_tests) = category_rows(&main);
        let scale = protocol_rows(&cells, false);
        let disjoint = protocol_rows(&cells, true);
        ExperimentReport {
            version: env!("CARGO_PKG_VERSION").into(),
            seeds: cfg.seeds.clone(),
            lambda: cfg.ngram.as_ref().map_or(0.1, |n| n.lambda),
            injection: cfg.injection.clone(),
            failed: cells.iter().filter(|c| matches!(c.status, CellStatus::Failed { .. })).count(),
            ngram_table: aggregate(&main, &corpora, true),
            transformer_table: aggregate(&main, &corpora, false),
            spearman: spearman_rows(&main),
            paired: paired_rows(&main, &corpora),
            regression: regression_rows(&main),
            mad: mad_rows(&main),
            category_means,
            category_tests,
            disjoint_spread: spread_rows(&disjoint),
            scale,
            disjoint,
            corpora,
            cells,
        }
    }

    pub fn slope(&self, family: &str) -> Option<f64> {
        self.regression.iter().find(|r| r.family == family).and_then(|r| r.slope)
    }

    /// Readable summary: pivoted score tables and the test results.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(s, "# Bias propagation report\n");
        let _ = writeln!(s, "{} cells, {} failed, seeds {:?}\n", self.cells.len(), self.failed, self.seeds);
        let levels = uniq(self.ngram_table.iter().chain(&self.transformer_table).map(|r| r.injection.to_bits()));
        let all = |rows: &[AggregateRow]| -> Vec<AggregateRow> {
            rows.iter().filter(|r| r.scope == "all").cloned().collect()
        };
        let ng = all(&self.ngram_table);
        if !ng.is_empty() {
            let orders = uniq(ng.iter().filter_map(|r| r.model.n));
            let _ = writeln!(s, "## n-gram bias score (mean ± std over corpora and seeds)\n");
            let mut head = "| smoothing |".to_string();
            for &lv in &levels {
                for n in &orders {
                    let _ = write!(head, " {:.2} n={n} |", f64::from_bits(lv));
                }
            }
            let _ = writeln!(s, "{head}\n|{}", "---|".repeat(1 + levels.len() * orders.len()));
            for sm in uniq(ng.iter().filter_map(|r| r.model.smoothing.clone())) {
                let _ = write!(s, "| {sm} |");
                for &lv in &levels {
                    for &n in &orders {
                        let cell = ng.iter().find(|r| {
                            r.model.smoothing.as_deref() == Some(&sm)
                                && r.model.n == Some(n)
                                && r.injection.to_bits() == lv
                        });
                        let _ = write!(
                            s,
                            " {} |",
                            cell.map_or("-".into(), |r| format!("{:.3} ± {}", r.mean, f(r.std)))
                        );
                    }
                }
                let _ = writeln!(s);
            }
            let _ = writeln!(s);
        }
        let tf = all(&self.transformer_table);
        for family in ["soft", "sparse"] {
            let rows: Vec<&AggregateRow> = tf.iter().filter(|r| r.model.family == family).collect();
            if rows.is_empty() {
                continue;
            }
            let heads = uniq(rows.iter().filter_map(|r| r.model.heads));
            let _ = writeln!(s, "## transformer bias score, {family} attention\n");
            let mut head = "| layers |".to_string();
            for &lv in &levels {
                for h in &heads {
                    let _ = write!(head, " {:.2} H={h} |", f64::from_bits(lv));
                }
            }
            let _ = writeln!(s, "{head}\n|{}", "---|".repeat(1 + levels.len() * heads.len()));
            for l in uniq(rows.iter().filter_map(|r| r.model.layers)) {
                let _ = write!(s, "| {l} |");
                for &lv in &levels {
                    for &h in &heads {
                        let cell = rows.iter().find(|r| {
                            r.model.layers == Some(l) && r.model.heads == Some(h) && r.injection.to_bits() == lv
                        });
                        let _ = write!(
                            s,
                            " {} |",
                            cell.map_or("-".into(), |r| format!("{:.3} ± {}", r.mean, f(r.std)))
                        );
                    }
                }
                let _ = writeln!(s);
            }
            let _ = writeln!(s);
        }
        if !self.regression.is_empty() {
            let _ = writeln!(s, "## slope of bias score against injection\n\n| family | points | slope | intercept |\n|---|---|---|---|");
            for r in &self.regression {
                let _ = writeln!(s, "| {} | {} | {} | {} |", r.family, r.points, f(r.slope), f(r.intercept));
            }
            let _ = writeln!(s);
        }
        if !self.mad.is_empty() {
            let _ = writeln!(s, "## mean absolute deviation from 0.5\n\n| family | cells | MAD |\n|---|---|---|");
            for r in &self.mad {
                let _ = writeln!(s, "| {} | {} | {} |", r.family, r.cells, f(r.mad));
            }
            let _ = writeln!(s);
        }
        if !self.spearman.is_empty() {
            let _ = writeln!(s, "## Spearman correlations\n\n| family | group | injection | variable | rho | p |\n|---|---|---|---|---|---|");
            for r in &self.spearman {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.2} | {} | {}{} | {} |",
                    r.family, r.group, r.injection, r.variable, f(r.rho), r.marker, f(r.p_value)
                );
            }
            let _ = writeln!(s);
        }
        if !self.paired.is_empty() {
            let _ = writeln!(s, "## paired t-tests across corpora\n\n| family | injection | from | to | pairs | t | p |\n|---|---|---|---|---|---|---|");
            for r in &self.paired {
                let _ = writeln!(
                    s,
                    "| {} | {:.2} | {} | {} | {} | {}{} | {} |",
                    r.family, r.injection, r.from, r.to, r.pairs, f(r.t), r.marker, f(r.p_value)
                );
            }
            let _ = writeln!(s);
        }
        if !self.scale.is_empty() {
            let _ = writeln!(s, "## scale\n\n| model | size | bias score | synthetic share |\n|---|---|---|---|");
            for r in &self.scale {
                let _ = writeln!(s, "| {} | {} | {} | {} |", r.label, r.sample, f(r.mean), f(r.synthetic_share));
            }
            let _ = writeln!(s);
        }
        if !self.disjoint_spread.is_empty() {
            let _ = writeln!(s, "## disjoint subsets\n\n| model | subsets | mean | std | range |\n|---|---|---|---|---|");
            for r in &self.disjoint_spread {
                let _ = writeln!(s, "| {} | {} | {} | {} | {} |", r.label, r.count, f(r.mean), f(r.std), f(r.range));
            }
            let _ = writeln!(s);
        }
        s
    }
}

#[derive(Serialize)]
struct CellRow<'a> {
    key: &'a str,
    #[serde(flatten)]
    model: ModelCols,
    corpus: &'a str,
    sample: String,
    injection: f64,
    seed: u64,
    status: &'static str,
    score: Option<f64>,
    scored: Option<usize>,
    skipped: Option<usize>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct CategoryPoint<'a> {
    key: &'a str,
    family: &'a str,
    corpus: &'a str,
    injection: f64,
    category: Category,
    score: Option<f64>,
    pairs: usize,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        let serde_json::Value::Object(map) = serde_json::to_value(r)? else {
            return Err(Error::Config("report row is not a record".into()));
        };
        debug_assert_eq!(map.keys().map(String::as_str).collect::<Vec<_>>(), header);
        w.write_record(header.iter().map(|k| match map.get(*k) {
            None | Some(serde_json::Value::Null) => String::new(),
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
        }))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `report.md` and one CSV per table into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let md = dir.join("report.md");
    std::fs::write(&md, report.to_markdown()).map_err(|e| Error::io(&md, e))?;

    const MODEL: [&str; 5] = ["family", "smoothing", "n", "layers", "heads"];
    let with_model = |pre: &[&'static str], post: &[&'static str]| -> Vec<&'static str> {
        pre.iter().chain(MODEL.iter()).chain(post).copied().collect()
    };

    let cells: Vec<CellRow> = report
        .cells
        .iter()
        .map(|c| {
            let (status, error) = match &c.status {
                CellStatus::Done(_) => ("done", None),
                CellStatus::Failed { error } => ("failed", Some(error.as_str())),
            };
            CellRow {
                key: &c.key,
                model: (&c.cell.model).into(),
                corpus: &c.cell.corpus,
                sample: match c.cell.sample {
                    Sample::Full => "full".into(),
                    Sample::Subsample { size } => format!("subsample:{size}"),
                    Sample::Disjoint { subsets, size, index } => format!("disjoint:{index}/{subsets}x{size}"),
                },
                injection: c.cell.injection,
                seed: c.cell.seed,
                status,
                score: c.score(),
                scored: c.result().map(|r| r.scored),
                skipped: c.result().map(|r| r.skipped),
                error,
            }
        })
        .collect();
    let cell_header = with_model(
        &["key"],
        &["corpus", "sample", "injection", "seed", "status", "score", "scored", "skipped", "error"],
    );
    write_rows(&dir.join("cells.csv"), &cells, &cell_header)?;

    let agg = with_model(&["scope"], &["injection", "mean", "std", "count"]);
    write_rows(&dir.join("ngram_table.csv"), &report.ngram_table, &agg)?;
    write_rows(&dir.join("transformer_table.csv"), &report.transformer_table, &agg)?;
    write_rows(
        &dir.join("spearman.csv"),
        &report.spearman,
        &["family", "group", "injection", "variable", "points", "rho", "p_value", "marker"],
    )?;
    write_rows(
        &dir.join("paired.csv"),
        &report.paired,
        &["family", "injection", "from", "to", "pairs", "mean_from", "mean_to", "t", "p_value", "direction", "marker"],
    )?;
    write_rows(&dir.join("regression.csv"), &report.regression, &["family", "points", "slope", "intercept"])?;
    write_rows(&dir.join("mad.csv"), &report.mad, &["family", "cells", "mad"])?;
    write_rows(&dir.join("category_means.csv"), &report.category_means, &["family", "category", "cells", "mean", "std"])?;
    write_rows(
        &dir.join("category_tests.csv"),
        &report.category_tests,
        &["family", "first", "second", "t", "p_value", "p_adjusted", "reject"],
    )?;
    let proto = with_model(&["label"], &["sample", "count", "mean", "synthetic_share"]);
    write_rows(&dir.join("scale.csv"), &report.scale, &proto)?;
    write_rows(&dir.join("disjoint.csv"), &report.disjoint, &proto)?;
    write_rows(
        &dir.join("disjoint_spread.csv"),
        &report.disjoint_spread,
        &with_model(&["label"], &["count", "mean", "std", "range"]),
    )?;

    // long format for plotting: one row per cell and category
    let points: Vec<CategoryPoint> = report
        .cells
        .iter()
        .filter(|c| c.cell.sample == Sample::Full)
        .filter_map(|c| c.result().map(|r| (c, r)))
        .flat_map(|(c, r)| {
            r.per_category.iter().map(move |k| CategoryPoint {
                key: &c.key,
                family: c.cell.model.family(),
                corpus: &c.cell.corpus,
                injection: c.cell.injection,
                category: k.category,
                score: k.score,
                pairs: k.pairs,
            })
        })
        .collect();
    write_rows(
        &dir.join("category_points.csv"),
        &points,
        &["key", "family", "corpus", "injection", "category", "score", "pairs"],
    )
}

//! Experiment grids: enumerate cells from a config, train and score each
//! one (with a content-addressed cache), and aggregate the results.

mod config;
mod grid;
mod report;

pub use config::{
    CorpusSource, DisjointAxes, ExperimentConfig, Generate, ModelHyper, NgramAxes, NgramCellSpec, PairSource,
    ScaleAxes, SmoothingKind, SyntheticSource, TrainHyper, TransformerAxes, TransformerCellSpec,
};
pub use grid::{
    CachedCell, CellOutcome, CellResult, CellSpec, CellStatus, ExperimentData, ExperimentGrid, ModelSpec, RunStats,
    Runner, Sample, TrainInfo,
};
pub use report::{
    emit_report, AggregateRow, CategoryMeanRow, CategoryTestRow, ExperimentReport, MadRow, ModelCols, PairedRow,
    ProtocolRow, RegressionRow, SpearmanRow, SpreadRow,
};

use crate::error::{Error, Result};

/// Least-squares line through `(injection, score)` points; returns
/// `(slope, intercept)`. Needs at least two distinct injection levels.
pub fn fit_injection_regression(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.iter().any(|(x, y)| x.is_nan() || y.is_nan()) {
        return Err(Error::NaN);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return Err(Error::Stats("regression needs two distinct injection levels".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Loads the data, runs every cell and builds the report.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(&CellOutcome, bool) + Sync),
) -> Result<(ExperimentReport, RunStats)> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    let grid = ExperimentGrid::from_config(cfg);
    let runner = Runner::new(cfg, &data);
    let (outcomes, stats) = runner.run(&grid.cells, progress);
    Ok((ExperimentReport::build(cfg, outcomes), stats))
}

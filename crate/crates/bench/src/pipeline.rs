//! Data loading, preprocessing and the per-model train/val/test protocol.
//!
//! Everything fitted from data (gap fill, anomaly statistics, feature
//! selection, scalers, models) sees only rows before the test window.
//! Validation forecasts start at the end of train; test forecasts start at
//! the end of validation and never refit.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::PathBuf;

use lightcast_core::featsel::{mrmr_select, SelectionState};
use lightcast_core::frame::parse_timestamp;
use lightcast_core::metrics::Metrics;
use lightcast_core::preprocess::zscore_filter_rows;
use lightcast_core::{enforce_hourly_grid, split_rows, GridReport, SplitIndices, TimeSeriesFrame, ZScoreReport, HOUR};
use lightcast_ingest::client::FIXTURE_DIR_ENV;
use lightcast_ingest::{merge_sources, Ingestor, ProviderQuery};
use lightcast_models::{Forecaster, ModelKind};
use log::info;
use rayon::prelude::*;

use crate::config::{RunConfig, SourceKind};
use crate::error::{BenchError, Result, StageExt};
use crate::synthetic;

/// Loads the raw frame named by the configuration's data source.
pub fn load_source(config: &RunConfig) -> Result<TimeSeriesFrame> {
    let d = &config.data;
    match d.source {
        SourceKind::Synthetic => synthetic::generate(&d.synthetic, config.seed),
        SourceKind::Cache => {
            let path = d.cache_path.as_ref().ok_or_else(|| BenchError::Config("cache source needs data.cache_path".into()))?;
            lightcast_ingest::load_csv(path).stage("load")
        }
        SourceKind::Fixture | SourceKind::Live => {
            let ingestor = if d.source == SourceKind::Fixture {
                let dir = match &d.fixture_dir {
                    Some(p) => p.clone(),
                    None => std::env::var(FIXTURE_DIR_ENV)
                        .map(PathBuf::from)
                        .map_err(|_| BenchError::Config(format!("fixture source needs data.fixture_dir or {FIXTURE_DIR_ENV}")))?,
                };
                Ingestor::fixtures(dir)
            } else {
                Ingestor::http().stage("fetch")?
            };
            let parse = |s: &Option<String>, what: &str| {
                let s = s.as_ref().ok_or_else(|| BenchError::Config(format!("data.{what} is required")))?;
                parse_timestamp(s).map_err(|e| BenchError::Config(format!("data.{what}: {e}")))
            };
            let q = ProviderQuery::new(d.latitude, d.longitude, parse(&d.start, "start")?, parse(&d.end, "end")?).with_env_api_key();
            let pollutants = ingestor.fetch_pollutants(&q).stage("fetch pollutants")?;
            let weather = ingestor.fetch_weather(&q).stage("fetch weather")?;
            Ok(merge_sources(&pollutants, &weather).stage("merge")?.0)
        }
    }
}

/// Preprocessed data ready for model fitting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub frame: TimeSeriesFrame,
    pub split: SplitIndices,
    pub grid: GridReport,
    pub zscore: ZScoreReport,
    pub selections: BTreeMap<String, SelectionState>,
}

impl Prepared {
    pub fn regressors(&self, target: &str) -> &[String] {
        &self.selections[target].selected
    }

    /// Every row before the test window.
    pub fn history(&self) -> TimeSeriesFrame {
        self.frame.slice_rows(0..self.split.val.end).expect("split lies inside the frame")
    }
}

/// Places `frame` on the hourly grid, then fills holes separately in the
/// rows before the last `test_len` and in the test rows, so no filled value
/// depends on the other side of the boundary.
pub fn grid_without_lookahead(frame: &TimeSeriesFrame, test_len: usize) -> Result<(TimeSeriesFrame, GridReport)> {
    let ts = frame.timestamps();
    if ts.len() < 2 {
        return Err(BenchError::stage("grid", format!("need at least 2 rows, got {}", ts.len())));
    }
    let first = ts[0];
    let n = ((ts[ts.len() - 1] - first) / HOUR) as usize + 1;
    if let Some(t) = ts.iter().find(|t| (**t - first) % HOUR != 0) {
        return Err(BenchError::stage("grid", format!("timestamp {t} is not on the hourly grid")));
    }
    let mut values = vec![vec![f64::NAN; frame.n_cols()]; n];
    for (i, &t) in ts.iter().enumerate() {
        values[((t - first) / HOUR) as usize] = frame.row(i).to_vec();
    }
    let grid_ts: Vec<i64> = (0..n as i64).map(|i| first + i * HOUR).collect();
    let full = TimeSeriesFrame::from_rows(grid_ts, frame.columns().to_vec(), values).stage("grid")?;
    if n <= test_len + 1 {
        return Err(BenchError::stage("grid", format!("{n} hourly rows leave no history before a {test_len}-hour test window")));
    }
    let cut = n - test_len;
    let mut report = GridReport::default();
    let mut parts = Vec::new();
    for range in [0..cut, cut..n] {
        let part = full.slice_rows(range).stage("grid")?;
        let filled = if part.len() >= 2 {
            let (f, r) = enforce_hourly_grid(&part).stage("grid")?;
            report.filled_cells += r.filled_cells;
            f
        } else if part.all_finite() {
            part
        } else {
            return Err(BenchError::stage("grid", "single-row test window has missing values"));
        };
        parts.push(filled);
    }
    report.inserted = (0..n).filter(|i| frame.row_of(first + *i as i64 * HOUR).is_none()).map(|i| first + i as i64 * HOUR).collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for p in &parts {
        rows.extend((0..p.len()).map(|i| p.row(i).to_vec()));
    }
    let out = TimeSeriesFrame::from_rows(full.timestamps().to_vec(), frame.columns().to_vec(), rows).stage("grid")?;
    Ok((out, report))
}

fn candidates_for(config: &RunConfig, frame: &TimeSeriesFrame, target: &str) -> Vec<String> {
    let pool: Vec<String> = if config.candidates.is_empty() { frame.columns().to_vec() } else { config.candidates.clone() };
    pool.into_iter().filter(|c| c != target).collect()
}

/// A frame after gap filling and anomaly replacement.
#[derive(Debug, Clone)]
pub struct Cleaned {
    pub frame: TimeSeriesFrame,
    pub split: SplitIndices,
    pub grid: GridReport,
    pub zscore: ZScoreReport,
}

/// Grid and split, then the anomaly filter with train statistics applied to
/// train and validation rows.
pub fn clean(raw: &TimeSeriesFrame, config: &RunConfig) -> Result<Cleaned> {
    let (frame, grid) = grid_without_lookahead(raw, config.horizon)?;
    let split = split_rows(frame.len(), config.horizon).stage("split")?;
    let (frame, zscore) =
        zscore_filter_rows(&frame, config.anomaly_threshold, split.train.clone(), 0..split.val.end).stage("anomaly filter")?;
    Ok(Cleaned { frame, split, grid, zscore })
}

/// [`clean`] followed by per-target feature selection on train rows.
pub fn prepare(raw: &TimeSeriesFrame, config: &RunConfig) -> Result<Prepared> {
    let Cleaned { frame, split, grid, zscore } = clean(raw, config)?;
    let mut selections = BTreeMap::new();
    for target in &config.targets {
        let cands = candidates_for(config, &frame, target);
        let k = config.k.min(cands.len());
        let sel = mrmr_select(&frame, target, &cands, k, split.train.clone(), config.mi_bins)
            .stage(&format!("feature selection for {target}"))?;
        info!("{target}: selected {:?}", sel.selected);
        selections.insert(target.clone(), sel);
    }
    Ok(Prepared { frame, split, grid, zscore, selections })
}

fn val_free(config: &RunConfig, kind: ModelKind) -> bool {
    kind == ModelKind::Fbp && config.fbp_val_free
}

/// Fits one model using only rows before the test window.
pub fn fit_model(prepared: &Prepared, config: &RunConfig, kind: ModelKind, target: &str) -> Result<Forecaster> {
    let history = prepared.history();
    let s = &prepared.split;
    let (train, val) = if val_free(config, kind) { (0..s.val.end, None) } else { (s.train.clone(), Some(s.val.clone())) };
    Forecaster::fit(kind, &config.models, &history, target, prepared.regressors(target), train, val)
        .stage(&format!("fit {} {target}", kind.label()))
}

/// A forecast over a held-out window, aligned with its actuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub model: ModelKind,
    pub target: String,
    pub timestamps: Vec<i64>,
    pub actual: Vec<f64>,
    pub forecast: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model: ModelKind,
    pub target: String,
    pub forecaster: Forecaster,
    pub train: Option<Metrics>,
    pub val: Option<Metrics>,
    pub test: Metrics,
    pub test_forecast: ForecastSeries,
}

fn horizon_frame(frame: &TimeSeriesFrame, rows: Range<usize>, target: &str) -> Result<TimeSeriesFrame> {
    let cols: Vec<&String> = frame.columns().iter().filter(|c| *c != target).collect();
    frame.slice_rows(rows).and_then(|f| f.select(&cols)).stage("horizon")
}

/// Multi-step forecast of `rows` from the rows before them.
fn forecast_window(prepared: &Prepared, f: &Forecaster, rows: Range<usize>) -> Result<Vec<f64>> {
    let history = prepared.frame.slice_rows(0..rows.start).stage("history")?;
    let horizon = horizon_frame(&prepared.frame, rows, &f.target)?;
    f.forecast(&history, &horizon).stage(&format!("forecast {} {}", f.kind().label(), f.target))
}

fn metrics(stage: &str, y: &[f64], yhat: &[f64]) -> Result<Metrics> {
    Metrics::compute(y, yhat).stage(stage)
}

/// Fits and scores one (model, target) pair.
pub fn run_model(prepared: &Prepared, config: &RunConfig, kind: ModelKind, target: &str) -> Result<ModelRun> {
    let f = fit_model(prepared, config, kind, target)?;
    let s = &prepared.split;
    let frame = &prepared.frame;
    let y = frame.column(target).stage("target")?;
    let label = format!("{} {target}", kind.label());

    let fit_rows = if val_free(config, kind) { 0..s.val.end } else { s.train.clone() };
    let ins = f.predict_in_sample(&prepared.history(), fit_rows).stage(&format!("in-sample {label}"))?;
    let actual: Vec<f64> = ins.timestamps.iter().map(|t| y[frame.row_of(*t).expect("in-sample rows exist")]).collect();
    let train = Some(metrics(&format!("train metrics {label}"), &actual, &ins.values)?);

    let val = if val_free(config, kind) {
        None
    } else {
        let fc = forecast_window(prepared, &f, s.val.clone())?;
        Some(metrics(&format!("val metrics {label}"), &y[s.val.clone()], &fc)?)
    };

    let fc = forecast_window(prepared, &f, s.test.clone())?;
    let test = metrics(&format!("test metrics {label}"), &y[s.test.clone()], &fc)?;
    let test_forecast = ForecastSeries {
        model: kind,
        target: target.to_string(),
        timestamps: frame.timestamps()[s.test.clone()].to_vec(),
        actual: y[s.test.clone()].to_vec(),
        forecast: fc,
    };
    Ok(ModelRun { model: kind, target: target.to_string(), forecaster: f, train, val, test, test_forecast })
}

/// Repeats the last value observed before each window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Persistence {
    pub val: Metrics,
    pub test: Metrics,
}

pub fn persistence(prepared: &Prepared, target: &str) -> Result<Persistence> {
    let y = prepared.frame.column(target).stage("persistence")?;
    let s = &prepared.split;
    let window = |r: Range<usize>| {
        let last = y[r.start - 1];
        metrics("persistence", &y[r.clone()], &vec![last; r.len()])
    };
    Ok(Persistence { val: window(s.val.clone())?, test: window(s.test.clone())? })
}

/// Runs every enabled (model, target) pair in parallel. Results come back
/// in model order, then target order.
pub fn run_models(prepared: &Prepared, config: &RunConfig) -> Result<Vec<ModelRun>> {
    let mut models = config.enabled_models.clone();
    models.sort();
    models.dedup();
    let jobs: Vec<(ModelKind, &String)> =
        models.iter().flat_map(|m| config.targets.iter().map(move |t| (*m, t))).collect();
    jobs.par_iter().map(|(m, t)| run_model(prepared, config, *m, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with_gap() -> TimeSeriesFrame {
        let keep: Vec<i64> = (0..20).filter(|h| *h != 14).collect();
        let ts = keep.iter().map(|h| h * HOUR).collect();
        let v: Vec<f64> = keep.iter().map(|h| if *h >= 15 { 100.0 } else { *h as f64 }).collect();
        TimeSeriesFrame::from_columns(ts, vec![("a", v)]).unwrap()
    }

    #[test]
    fn gap_before_test_is_filled_from_history_only() {
        let f = frame_with_gap();
        let (g, report) = grid_without_lookahead(&f, 5).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(report.inserted, vec![14 * HOUR]);
        // hour 14 is the last history row: it takes hour 13, not the test value 100
        assert_eq!(g.column("a").unwrap()[14], 13.0);
        let (whole, _) = enforce_hourly_grid(&f).unwrap();
        assert_ne!(whole.column("a").unwrap()[14], 13.0);
    }

    #[test]
    fn grid_needs_history() {
        let f = frame_with_gap();
        assert!(grid_without_lookahead(&f, 19).is_err());
        assert!(grid_without_lookahead(&f.slice_rows(0..1).unwrap(), 0).is_err());
    }
}

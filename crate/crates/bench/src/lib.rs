//! End-to-end benchmark: load data, preprocess without look-ahead, select
//! regressors, fit every enabled model for every target, score the
//! validation and test windows, and write the report, models, forecasts
//! and plots.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lightcast_core::frame::format_timestamp;
use log::info;

pub use config::{DataConfig, RunConfig, SourceKind};
pub use error::{BenchError, Result};
pub use pipeline::{clean, load_source, prepare, run_models, Cleaned, ForecastSeries, ModelRun, Prepared};
pub use plot::emit_plots;
pub use report::{MetricsReport, ModelResult, REPORT_VERSION};
pub use synthetic::SyntheticConfig;

use report::{BaselineResult, DataSummary, SelectionSummary};

/// What a benchmark run produced.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: MetricsReport,
    pub runs: Vec<ModelRun>,
    pub artifacts: Vec<PathBuf>,
}

/// Runs the benchmark in memory. No files are written.
pub fn evaluate(config: &RunConfig) -> Result<(MetricsReport, Vec<ModelRun>)> {
    config.validate()?;
    let raw = load_source(config)?;
    info!("loaded {} rows x {} columns", raw.len(), raw.n_cols());
    let prepared = prepare(&raw, config)?;
    let runs = run_models(&prepared, config)?;
    let report = assemble(config, &prepared, &runs)?;
    Ok((report, runs))
}

fn assemble(config: &RunConfig, prepared: &Prepared, runs: &[ModelRun]) -> Result<MetricsReport> {
    let mut persistence = Vec::new();
    for target in &config.targets {
        let p = pipeline::persistence(prepared, target)?;
        persistence.push(BaselineResult { target: target.clone(), val: p.val, test: p.test });
    }
    let results = runs
        .iter()
        .map(|r| {
            let base = persistence.iter().find(|b| b.target == r.target).map(|b| b.test.rmse);
            ModelResult {
                model: r.model,
                target: r.target.clone(),
                train: r.train,
                val: r.val,
                test: r.test,
                regressors: r.forecaster.regressors.clone(),
                rmse_vs_persistence: base.filter(|b| *b > 0.0).map(|b| r.test.rmse / b),
            }
        })
        .collect();
    let ts = prepared.frame.timestamps();
    let s = &prepared.split;
    let selections = prepared
        .selections
        .iter()
        .map(|(t, sel)| (t.clone(), SelectionSummary { selected: sel.selected.clone(), relevance: sel.relevance.clone() }))
        .collect::<BTreeMap<_, _>>();
    Ok(MetricsReport {
        format_version: REPORT_VERSION,
        generated_at: format_timestamp(ts[ts.len() - 1]),
        config_digest: config.digest(),
        seed: config.seed,
        data: DataSummary {
            rows: ts.len(),
            first: format_timestamp(ts[0]),
            last: format_timestamp(ts[ts.len() - 1]),
            inserted_rows: prepared.grid.inserted.len(),
            filled_cells: prepared.grid.filled_cells,
            anomalies_replaced: prepared.zscore.replaced,
            train_rows: s.train.len(),
            val_rows: s.val.len(),
            test_rows: s.test.len(),
        },
        selections,
        results,
        persistence,
    })
}

fn write(path: &Path, contents: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
    artifacts.push(path.to_path_buf());
    Ok(())
}

fn forecast_csv(f: &ForecastSeries) -> String {
    let mut s = String::from("timestamp,actual,forecast\n");
    for ((t, a), p) in f.timestamps.iter().zip(&f.actual).zip(&f.forecast) {
        s.push_str(&format!("{},{a},{p}\n", format_timestamp(*t)));
    }
    s
}

/// Runs the benchmark and writes every artifact under `config.output_dir`:
/// `report.json`, `report.txt`, `models/`, `forecasts/` and `plots/`.
pub fn run_benchmark(config: &RunConfig) -> Result<BenchOutcome> {
    let (report, runs) = evaluate(config)?;
    let out = &config.output_dir;
    let mut artifacts = Vec::new();
    write(&out.join("report.json"), &report.to_json(), &mut artifacts)?;
    write(&out.join("report.txt"), &report.to_table(), &mut artifacts)?;
    for r in &runs {
        let stem = format!("{}_{}", r.model.id(), r.target);
        let json = r.forecaster.to_json().map_err(|e| BenchError::stage("serialize model", e))?;
        write(&out.join("models").join(format!("{stem}.json")), &json, &mut artifacts)?;
        write(&out.join("forecasts").join(format!("{stem}_test.csv")), &forecast_csv(&r.test_forecast), &mut artifacts)?;
    }
    let series: Vec<ForecastSeries> = runs.iter().map(|r| r.test_forecast.clone()).collect();
    artifacts.extend(emit_plots(&report, &series, &out.join("plots"))?);
    info!("wrote {} artifacts to {}", artifacts.len(), out.display());
    Ok(BenchOutcome { report, runs, artifacts })
}

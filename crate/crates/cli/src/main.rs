use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lightcast_bench::pipeline::{clean, fit_model, prepare};
use lightcast_bench::{load_source, run_benchmark, RunConfig, SourceKind};
use lightcast_core::frame::format_timestamp;
use lightcast_core::metrics::Metrics;
use lightcast_core::TimeSeriesFrame;
use lightcast_models::{Forecaster, ModelKind};
use log::info;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "lightcast", version, about = "Leakage-safe hourly air-quality forecasting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Data source: live, cache, fixture or synthetic.
    #[arg(long, global = true, value_parser = parse_source)]
    source: Option<SourceKind>,
    /// CSV to read instead of the configured source.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Test window and forecast length in hours (default 168).
    #[arg(long, global = true, value_name = "HOURS")]
    horizon: Option<usize>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download and merge provider data into data.csv.
    Fetch,
    /// Fill gaps and replace anomalies; writes preprocessed.csv and preprocess.json.
    Preprocess,
    /// Feature selection report per target.
    SelectFeatures {
        #[arg(long)]
        target: Option<String>,
    },
    /// Fit one model and write its JSON document.
    Train {
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long)]
        target: String,
    },
    /// Forecast the final horizon of the data with a saved model.
    Forecast {
        #[arg(long, value_name = "PATH")]
        model_file: PathBuf,
    },
    /// Score a forecast CSV against actuals.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        forecast: PathBuf,
        #[arg(long, value_name = "PATH")]
        actual: PathBuf,
        #[arg(long)]
        target: String,
    },
    /// Full benchmark: report, models, forecasts and plots.
    Bench {
        /// Restrict to these models.
        #[arg(long, value_parser = parse_model)]
        model: Vec<ModelKind>,
        /// Restrict to these targets.
        #[arg(long)]
        target: Vec<String>,
    },
}

fn parse_source(s: &str) -> std::result::Result<SourceKind, String> {
    s.parse().map_err(|e: lightcast_bench::BenchError| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(source) = c.source {
        cfg.data.source = source;
    }
    if let Some(input) = &c.input {
        cfg.data.source = SourceKind::Cache;
        cfg.data.cache_path = Some(input.clone());
    }
    if let Some(h) = c.horizon {
        cfg.horizon = h;
    }
    Ok(cfg)
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.join(name))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<TimeSeriesFrame> {
    cfg.validate()?;
    Ok(load_source(cfg)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Fetch => {
            let frame = load(&cfg)?;
            let path = out_file(&cfg, "data.csv")?;
            frame.write_csv(&path)?;
            println!("wrote {} ({} rows)", path.display(), frame.len());
        }
        Command::Preprocess => {
            let cleaned = clean(&load(&cfg)?, &cfg)?;
            let path = out_file(&cfg, "preprocessed.csv")?;
            cleaned.frame.write_csv(&path)?;
            println!("wrote {} ({} rows)", path.display(), cleaned.frame.len());
            let summary = serde_json::json!({
                "rows": cleaned.frame.len(),
                "inserted": cleaned.grid.inserted.iter().map(|t| format_timestamp(*t)).collect::<Vec<_>>(),
                "filled_cells": cleaned.grid.filled_cells,
                "anomalies": cleaned.zscore,
                "split": {
                    "train": cleaned.split.train.len(),
                    "val": cleaned.split.val.len(),
                    "test": cleaned.split.test.len(),
                },
            });
            write_json(&out_file(&cfg, "preprocess.json")?, &summary)?;
        }
        Command::SelectFeatures { target } => {
            if let Some(t) = target {
                cfg.targets = vec![t];
            }
            let prepared = prepare(&load(&cfg)?, &cfg)?;
            for (target, sel) in &prepared.selections {
                println!("{target}: {}", sel.selected.join(", "));
                write_json(&out_file(&cfg, &format!("features_{target}.json"))?, sel)?;
            }
        }
        Command::Train { model, target } => {
            cfg.targets = vec![target.clone()];
            let prepared = prepare(&load(&cfg)?, &cfg)?;
            let f = fit_model(&prepared, &cfg, model, &target)?;
            let path = out_file(&cfg, &format!("model_{}_{target}.json", model.id()))?;
            std::fs::write(&path, f.to_json()?)?;
            println!("wrote {} (regressors: {})", path.display(), f.regressors.join(", "));
        }
        Command::Forecast { model_file } => {
            let f = Forecaster::from_json(&std::fs::read_to_string(&model_file)?)?;
            let frame = clean(&load(&cfg)?, &cfg)?.frame;
            let n = frame.len();
            let h = cfg.horizon;
            let history = frame.slice_rows(0..n - h)?;
            let cols: Vec<&String> = frame.columns().iter().filter(|c| **c != f.target).collect();
            let horizon = frame.slice_rows(n - h..n)?.select(&cols)?;
            let values = f.forecast(&history, &horizon)?;
            let out = TimeSeriesFrame::from_columns(horizon.timestamps().to_vec(), vec![("forecast", values)])?;
            let path = out_file(&cfg, &format!("forecast_{}_{}.csv", f.kind().id(), f.target))?;
            out.write_csv(&path)?;
            println!("wrote {} ({h} hours)", path.display());
        }
        Command::Evaluate { forecast, actual, target } => {
            let fc = TimeSeriesFrame::read_csv(&forecast)?;
            let column = if fc.has_column("forecast") {
                "forecast".to_string()
            } else if fc.n_cols() == 1 {
                fc.columns()[0].clone()
            } else {
                return Err(format!("{} has no forecast column", forecast.display()).into());
            };
            let act = TimeSeriesFrame::read_csv(&actual)?;
            let truth = act.column(&target)?;
            let mut y = Vec::with_capacity(fc.len());
            for &t in fc.timestamps() {
                let i = act.row_of(t).ok_or_else(|| format!("no actual value at {}", format_timestamp(t)))?;
                y.push(truth[i]);
            }
            let m = Metrics::compute(&y, &fc.column(&column)?)?;
            println!("N    {}", m.n);
            println!("MAE  {}", m.mae);
            println!("RMSE {}", m.rmse);
            println!("R2   {}", m.r2.map_or("--".to_string(), |v| v.to_string()));
        }
        Command::Bench { model, target } => {
            if !model.is_empty() {
                cfg.enabled_models = model;
            }
            if !target.is_empty() {
                cfg.targets = target;
            }
            let outcome = run_benchmark(&cfg)?;
            print!("{}", outcome.report.to_table());
            println!("wrote {} files to {}", outcome.artifacts.len(), cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    info!("running {:?}", cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::time::Instant;

use lightcast_bench::pipeline::ForecastSeries;
use lightcast_bench::plot::{bar_chart_svg, emit_plots, overlay_svg};
use lightcast_bench::{evaluate, run_benchmark, MetricsReport, RunConfig, SourceKind};
use lightcast_models::ModelKind;

fn small_config(models: &[ModelKind]) -> RunConfig {
    let mut c = RunConfig::default();
    c.data.synthetic.hours = 2400;
    c.enabled_models = models.to_vec();
    c.models.gbt.max_rounds = 60;
    c
}

#[test]
fn additive_only_reports_all_splits_for_both_targets() {
    let (report, runs) = evaluate(&small_config(&[ModelKind::Fbp])).unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(report.results.len(), 2);
    for r in &report.results {
        assert_eq!(r.model, ModelKind::Fbp);
        assert!(r.train.is_some() && r.val.is_some());
        assert_eq!(r.test.n, 168);
        assert!(r.test.rmse >= r.test.mae);
        assert!(r.rmse_vs_persistence.is_some());
    }
    assert_eq!(report.data.test_rows, 168);
    assert_eq!(report.data.train_rows + report.data.val_rows + 168, report.data.rows);
    assert_eq!(report.persistence.len(), 2);
}

#[test]
fn val_free_mode_omits_additive_validation() {
    let mut c = small_config(&[ModelKind::Fbp, ModelKind::Np]);
    c.fbp_val_free = true;
    c.targets = vec!["pm2_5".into()];
    let (report, _) = evaluate(&c).unwrap();
    assert!(report.result(ModelKind::Fbp, "pm2_5").unwrap().val.is_none());
    assert!(report.result(ModelKind::Np, "pm2_5").unwrap().val.is_some());
    let table = report.to_table();
    let fbp_line = table.lines().find(|l| l.starts_with("FBP")).unwrap();
    assert_eq!(fbp_line.matches("--").count(), 2);
}

#[test]
fn every_model_runs_in_report_order() {
    let t = Instant::now();
    let (report, _) = evaluate(&small_config(&ModelKind::ALL)).unwrap();
    eprintln!("all models on 2400 rows: {:?}", t.elapsed());
    let order: Vec<(ModelKind, &str)> = report.results.iter().map(|r| (r.model, r.target.as_str())).collect();
    let mut sorted = order.clone();
    sorted.sort_by_key(|(m, t)| (*m, *t != "pm2_5"));
    assert_eq!(order, sorted);
    assert_eq!(report.results.len(), 8);
    for r in &report.results {
        assert!(r.test.mae.is_finite() && r.test.rmse >= r.test.mae, "{r:?}");
    }
}

#[test]
fn artifacts_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(&[ModelKind::Fbp, ModelKind::Gbt]);
    c.targets = vec!["pm10".into()];
    c.output_dir = dir.path().join("a");
    let a = run_benchmark(&c).unwrap();
    c.output_dir = dir.path().join("b");
    let b = run_benchmark(&c).unwrap();
    assert_eq!(a.artifacts.len(), b.artifacts.len());
    for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let names: Vec<String> =
        a.artifacts.iter().map(|p| p.strip_prefix(dir.path().join("a")).unwrap().display().to_string()).collect();
    for expected in [
        "report.json",
        "report.txt",
        "models/fbp_pm10.json",
        "forecasts/gbt_pm10_test.csv",
        "plots/fbp_pm10_test.svg",
        "plots/test_errors.svg",
    ] {
        assert!(names.contains(&expected.to_string()), "{expected} missing from {names:?}");
    }
    let text = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    assert_eq!(MetricsReport::from_json(&text).unwrap(), a.report);
    let model = std::fs::read_to_string(dir.path().join("a/models/fbp_pm10.json")).unwrap();
    assert_eq!(lightcast_models::Forecaster::from_json(&model).unwrap(), a.runs[0].forecaster);
}

#[test]
fn stage_errors_name_the_stage() {
    let mut c = small_config(&[ModelKind::Fbp]);
    c.targets = vec!["ozone".into()];
    let e = evaluate(&c).unwrap_err().to_string();
    assert!(e.contains("feature selection for ozone"), "{e}");

    let mut c = small_config(&[ModelKind::Fbp]);
    c.data.source = SourceKind::Cache;
    c.data.cache_path = Some("/nonexistent/cache.csv".into());
    let e = evaluate(&c).unwrap_err().to_string();
    assert!(e.contains("load"), "{e}");
}

fn series(model: ModelKind, target: &str) -> ForecastSeries {
    let n = 48;
    ForecastSeries {
        model,
        target: target.into(),
        timestamps: (0..n).map(|h| 1_700_000_000 + h * 3600).collect(),
        actual: (0..n).map(|h| 30.0 + (h as f64 / 5.0).sin() * 10.0).collect(),
        forecast: (0..n).map(|h| 30.0 + (h as f64 / 5.5).sin() * 9.0).collect(),
    }
}

#[test]
fn plot_counts_and_determinism() {
    let (report, _) = evaluate(&{
        let mut c = small_config(&[ModelKind::Fbp]);
        c.targets = vec!["pm2_5".into()];
        c
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let one = emit_plots(&report, &[series(ModelKind::Fbp, "pm2_5")], &dir.path().join("one")).unwrap();
    assert_eq!(one.len(), 2);
    let none = emit_plots(&report, &[], &dir.path().join("none")).unwrap();
    assert_eq!(none.len(), 1);
    assert!(none[0].ends_with("test_errors.svg"));
    let mut empty = report.clone();
    empty.results.clear();
    assert!(emit_plots(&empty, &[], &dir.path().join("empty")).unwrap().is_empty());

    let s = series(ModelKind::Sarimax, "pm10");
    assert_eq!(overlay_svg(&s), overlay_svg(&s));
    assert_eq!(bar_chart_svg(&report), bar_chart_svg(&report));
    let svg = overlay_svg(&s);
    assert!(svg.contains(r#"version="1.1""#) && svg.contains("SARIMAX PM10") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let synthetic = RunConfig::from_path(dir.join("synthetic.toml")).unwrap();
    synthetic.validate().unwrap();
    let mut defaults = RunConfig::default();
    defaults.output_dir = synthetic.output_dir.clone();
    assert_eq!(synthetic, defaults);
    let live = RunConfig::from_path(dir.join("live.toml")).unwrap();
    live.validate().unwrap();
    assert_eq!(live.data.source, SourceKind::Live);
}

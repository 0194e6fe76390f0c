use std::path::Path;
use std::process::{Command, Output};

fn lightcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightcast")).args(args).env_remove("OPENWEATHER_API_KEY").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synthetic_config(dir: &Path) -> String {
    let path = dir.join("synthetic.toml");
    std::fs::write(
        &path,
        r#"
seed = 3
enabled_models = ["fbp", "gbt"]

[data]
source = "synthetic"

[data.synthetic]
hours = 1500

[models.gbt]
max_rounds = 40
"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn bench_writes_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let out = dir.path().join("out");
    let o = lightcast(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("FBP"));
    for f in ["report.json", "report.txt", "plots/test_errors.svg", "plots/fbp_pm2_5_test.svg", "models/gbt_pm10.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries.len(), 2, "unexpected files next to the output directory: {entries:?}");
}

#[test]
fn usage_errors_exit_one() {
    let o = lightcast(&["train", "--model", "fbp"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--target"), "{}", stderr(&o));
    assert_eq!(lightcast(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lightcast(&["bench", "--model", "lstm"]).status.code(), Some(1));
    assert_eq!(lightcast(&["bench", "--no-such-flag"]).status.code(), Some(1));
    let help = lightcast(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("select-features"));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = lightcast(&["preprocess", "--input", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    let o = lightcast(&["fetch", "--source", "live", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_identical_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let actual = dir.path().join("actual.csv");
    let forecast = dir.path().join("forecast.csv");
    std::fs::write(&actual, "timestamp,pm2_5\n2024-01-01T00:00:00Z,10\n2024-01-01T01:00:00Z,12\n2024-01-01T02:00:00Z,9\n").unwrap();
    std::fs::write(&forecast, "timestamp,forecast\n2024-01-01T01:00:00Z,12\n2024-01-01T02:00:00Z,9\n").unwrap();
    let o = lightcast(&[
        "evaluate",
        "--forecast",
        forecast.to_str().unwrap(),
        "--actual",
        actual.to_str().unwrap(),
        "--target",
        "pm2_5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("MAE  0\n") && s.contains("RMSE 0\n") && s.contains("R2   1\n"), "{s}");
}

#[test]
fn step_by_step_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let out = dir.path().join("steps");
    let out_s = out.to_str().unwrap();
    let run = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend(["--config", cfg.as_str(), "--out", out_s]);
        let o = lightcast(&all);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["fetch"]);
    let data = out.join("data.csv");
    assert!(data.exists());
    run(&["preprocess", "--input", data.to_str().unwrap()]);
    let pre = out.join("preprocessed.csv");
    assert!(pre.exists() && out.join("preprocess.json").exists());
    let sel = run(&["select-features", "--target", "pm10", "--input", pre.to_str().unwrap()]);
    assert!(stdout(&sel).starts_with("pm10: "));
    assert!(out.join("features_pm10.json").exists());
    run(&["train", "--model", "np", "--target", "pm10", "--input", pre.to_str().unwrap()]);
    let model = out.join("model_np_pm10.json");
    run(&["forecast", "--model-file", model.to_str().unwrap(), "--input", pre.to_str().unwrap(), "--horizon", "168"]);
    let fc = out.join("forecast_np_pm10.csv");
    assert_eq!(std::fs::read_to_string(&fc).unwrap().lines().count(), 169);
    let ev = run(&["evaluate", "--forecast", fc.to_str().unwrap(), "--actual", pre.to_str().unwrap(), "--target", "pm10"]);
    assert!(stdout(&ev).contains("N    168"), "{}", stdout(&ev));
}

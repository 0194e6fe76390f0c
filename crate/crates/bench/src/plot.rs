//! Plain SVG 1.1 charts: forecast overlays and a grouped MAE/RMSE bar chart.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lightcast_core::frame::format_timestamp;

use crate::error::{BenchError, Result};
use crate::pipeline::ForecastSeries;
use crate::report::{target_label, MetricsReport};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const ACTUAL_COLOR: &str = "#222222";
const FORECAST_COLOR: &str = "#d62728";
const MAE_COLOR: &str = "#1f77b4";
const RMSE_COLOR: &str = "#ff7f0e";

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rounded bounds with a little headroom; never a zero-width range.
fn value_range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (if include_zero && lo >= 0.0 { lo } else { lo - pad }, hi + pad)
}

fn y_axis(s: &mut String, lo: f64, hi: f64, label: &str) {
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let y = MARGIN_TOP + plot_h * (1.0 - i as f64 / 5.0);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            WIDTH - MARGIN_RIGHT,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(label)
    );
}

fn polyline(s: &mut String, xs: &[f64], ys: &[f64], color: &str) {
    let pts: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
}

fn legend(s: &mut String, items: &[(&str, &str)]) {
    for (i, (name, color)) in items.iter().enumerate() {
        let x = MARGIN_LEFT + 10.0 + 130.0 * i as f64;
        let y = MARGIN_TOP + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="14" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            y - 9.0,
            x + 20.0,
            y
        );
    }
}

/// Forecast against actuals over the test window.
pub fn overlay_svg(series: &ForecastSeries) -> String {
    let title = format!("{} {} test forecast", series.model.label(), target_label(&series.target));
    let mut s = open(&title);
    let n = series.actual.len();
    let (lo, hi) = value_range(series.actual.iter().chain(&series.forecast).copied(), false);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |i: usize| MARGIN_LEFT + if n > 1 { plot_w * i as f64 / (n - 1) as f64 } else { plot_w / 2.0 };
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    y_axis(&mut s, lo, hi, "µg/m³");
    let xs: Vec<f64> = (0..n).map(x_of).collect();
    polyline(&mut s, &xs, &series.actual.iter().map(|v| y_of(*v)).collect::<Vec<_>>(), ACTUAL_COLOR);
    polyline(&mut s, &xs, &series.forecast.iter().map(|v| y_of(*v)).collect::<Vec<_>>(), FORECAST_COLOR);
    let ticks = 6.min(n);
    for k in 0..ticks {
        let i = if ticks > 1 { k * (n - 1) / (ticks - 1) } else { 0 };
        let label = format_timestamp(series.timestamps[i]);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            x_of(i),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            escape(&label[..label.len().min(16)])
        );
    }
    legend(&mut s, &[("actual", ACTUAL_COLOR), ("forecast", FORECAST_COLOR)]);
    s.push_str("</svg>\n");
    s
}

/// Test MAE and RMSE for every (model, target) row of the report.
pub fn bar_chart_svg(report: &MetricsReport) -> String {
    let mut s = open("Test MAE and RMSE");
    let groups: Vec<(String, f64, f64)> = report
        .results
        .iter()
        .map(|r| (format!("{} {}", r.model.label(), target_label(&r.target)), r.test.mae, r.test.rmse))
        .collect();
    let (lo, hi) = value_range(groups.iter().flat_map(|g| [g.1, g.2]), true);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    y_axis(&mut s, lo, hi, "µg/m³");
    let slot = plot_w / groups.len().max(1) as f64;
    let bar = slot * 0.35;
    for (i, (name, mae, rmse)) in groups.iter().enumerate() {
        let x0 = MARGIN_LEFT + slot * i as f64 + slot * 0.15;
        for (k, (v, color)) in [(*mae, MAE_COLOR), (*rmse, RMSE_COLOR)].into_iter().enumerate() {
            let top = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{color}"/>"#,
                x0 + bar * k as f64,
                (y_of(lo.max(0.0)) - top).max(0.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            x0 + bar,
            HEIGHT - MARGIN_BOTTOM + 18.0,
            escape(name)
        );
    }
    legend(&mut s, &[("MAE", MAE_COLOR), ("RMSE", RMSE_COLOR)]);
    s.push_str("</svg>\n");
    s
}

/// Writes one overlay per forecast series and, for a nonempty report, the
/// bar chart. Returns the written paths in order.
pub fn emit_plots(report: &MetricsReport, forecasts: &[ForecastSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| BenchError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for f in forecasts {
        let path = dir.join(format!("{}_{}_test.svg", f.model.id(), f.target));
        std::fs::write(&path, overlay_svg(f)).map_err(io(&path))?;
        written.push(path);
    }
    if !report.results.is_empty() {
        let path = dir.join("test_errors.svg");
        std::fs::write(&path, bar_chart_svg(report)).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

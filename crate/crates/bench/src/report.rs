//! Versioned metrics report and its aligned text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lightcast_core::metrics::Metrics;
use lightcast_models::ModelKind;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub target: String,
    pub train: Option<Metrics>,
    pub val: Option<Metrics>,
    pub test: Metrics,
    /// Regressors the model used, in selection order.
    pub regressors: Vec<String>,
    /// Test RMSE divided by the persistence test RMSE.
    pub rmse_vs_persistence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub target: String,
    pub val: Metrics,
    pub test: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub first: String,
    pub last: String,
    pub inserted_rows: usize,
    pub filled_cells: usize,
    pub anomalies_replaced: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub selected: Vec<String>,
    pub relevance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    /// Timestamp of the last data row, so reruns produce identical reports.
    pub generated_at: String,
    pub config_digest: String,
    pub seed: u64,
    pub data: DataSummary,
    pub selections: BTreeMap<String, SelectionSummary>,
    pub results: Vec<ModelResult>,
    pub persistence: Vec<BaselineResult>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn result(&self, model: ModelKind, target: &str) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.model == model && r.target == target)
    }

    pub fn baseline(&self, target: &str) -> Option<&BaselineResult> {
        self.persistence.iter().find(|b| b.target == target)
    }

    /// Aligned table: one row per model and target, then the persistence rows.
    pub fn to_table(&self) -> String {
        let header = ["Model", "Target", "Train MAE", "Train RMSE", "Val MAE", "Val RMSE", "Test MAE", "Test RMSE", "Test R2"];
        let mut rows: Vec<Vec<String>> = Vec::new();
        for kind in ModelKind::ALL {
            for r in self.results.iter().filter(|r| r.model == kind) {
                rows.push(row(kind.label(), &r.target, r.train.as_ref(), r.val.as_ref(), &r.test));
            }
        }
        for b in &self.persistence {
            rows.push(row("Persistence", &b.target, None, Some(&b.val), &b.test));
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(j, c)| if j < 2 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header.map(String::from), &mut out);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&rule, &mut out);
        for r in &rows {
            line(r, &mut out);
        }
        out
    }
}

pub fn target_label(target: &str) -> String {
    match target {
        "pm2_5" => "PM2.5".into(),
        "pm10" => "PM10".into(),
        other => other.to_string(),
    }
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "--".to_string(), |v| format!("{v:.digits$}"))
}

fn row(model: &str, target: &str, train: Option<&Metrics>, val: Option<&Metrics>, test: &Metrics) -> Vec<String> {
    vec![
        model.to_string(),
        target_label(target),
        num(train.map(|m| m.mae), 2),
        num(train.map(|m| m.rmse), 2),
        num(val.map(|m| m.mae), 2),
        num(val.map(|m| m.rmse), 2),
        num(Some(test.mae), 2),
        num(Some(test.rmse), 2),
        num(test.r2, 3),
    ]
}

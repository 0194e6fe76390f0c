use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::TimeSeriesFrame;

/// Per-column standardization fitted on training rows only.
///
/// Uses the population standard deviation. Columns not listed in the scaler
/// (targets in particular) pass through `transform` untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(frame: &TimeSeriesFrame, train: Range<usize>, columns: &[impl AsRef<str>]) -> Result<Self> {
        if train.is_empty() {
            return Err(CoreError::Empty);
        }
        let mut out = Scaler { columns: Vec::new(), means: Vec::new(), stds: Vec::new() };
        for name in columns {
            let name = name.as_ref();
            let col = frame.column_range(name, train.clone())?;
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if !(std > 0.0) || !std.is_finite() {
                return Err(CoreError::ConstantColumn(name.to_string()));
            }
            out.columns.push(name.to_string());
            out.means.push(mean);
            out.stds.push(std);
        }
        Ok(out)
    }

    /// A scaler that leaves everything unchanged.
    pub fn identity() -> Self {
        Scaler { columns: Vec::new(), means: Vec::new(), stds: Vec::new() }
    }

    pub fn transform(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        self.apply(frame, |x, m, s| (x - m) / s)
    }

    pub fn inverse_transform(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        self.apply(frame, |z, m, s| z * s + m)
    }

    pub fn transform_value(&self, column: &str, x: f64) -> Result<f64> {
        let k = self.position(column)?;
        Ok((x - self.means[k]) / self.stds[k])
    }

    fn position(&self, column: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == column).ok_or_else(|| CoreError::MissingColumn(column.to_string()))
    }

    fn apply(&self, frame: &TimeSeriesFrame, f: impl Fn(f64, f64, f64) -> f64) -> Result<TimeSeriesFrame> {
        let mut out = frame.clone();
        for (k, name) in self.columns.iter().enumerate() {
            let j = frame.column_index(name)?;
            let col: Vec<f64> = frame.column_at(j).into_iter().map(|x| f(x, self.means[k], self.stds[k])).collect();
            out.set_column_at(j, &col)?;
        }
        Ok(out)
    }
}

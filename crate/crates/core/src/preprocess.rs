//! Grid enforcement and z-score anomaly filtering.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::{TimeSeriesFrame, HOUR};

/// What [`enforce_hourly_grid`] had to repair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    /// Timestamps that were absent and got inserted.
    pub inserted: Vec<i64>,
    /// Non-finite cells in pre-existing rows that were interpolated.
    pub filled_cells: usize,
}

impl GridReport {
    pub fn is_clean(&self) -> bool {
        self.inserted.is_empty() && self.filled_cells == 0
    }
}

/// Puts a frame on the complete hourly grid between its first and last
/// timestamp. Absent rows and non-finite cells are linearly interpolated per
/// column; leading/trailing holes take the nearest valid value.
pub fn enforce_hourly_grid(frame: &TimeSeriesFrame) -> Result<(TimeSeriesFrame, GridReport)> {
    let ts = frame.timestamps();
    if ts.len() < 2 {
        return Err(CoreError::TooFewRows { needed: 2, got: ts.len() });
    }
    let first = ts[0];
    for &t in ts {
        if (t - first) % HOUR != 0 {
            return Err(CoreError::Misaligned(t));
        }
    }
    let n = ((ts[ts.len() - 1] - first) / HOUR) as usize + 1;
    let grid: Vec<i64> = (0..n as i64).map(|i| first + i * HOUR).collect();
    let slot: Vec<usize> = ts.iter().map(|&t| ((t - first) / HOUR) as usize).collect();

    let mut report = GridReport::default();
    let mut present = vec![false; n];
    for &s in &slot {
        present[s] = true;
    }
    report.inserted = grid.iter().zip(&present).filter(|(_, p)| !**p).map(|(t, _)| *t).collect();

    let mut cols = Vec::with_capacity(frame.n_cols());
    for j in 0..frame.n_cols() {
        let mut col = vec![f64::NAN; n];
        for (i, &s) in slot.iter().enumerate() {
            let v = frame.value(i, j);
            if !v.is_finite() {
                report.filled_cells += 1;
            }
            col[s] = v;
        }
        if !fill_by_interpolation(&mut col, |v| v.is_finite()) {
            return Err(CoreError::NoFiniteValues(frame.columns()[j].clone()));
        }
        cols.push((frame.columns()[j].clone(), col));
    }
    if !report.is_clean() {
        warn!(
            "hourly grid: inserted {} rows, filled {} non-finite cells",
            report.inserted.len(),
            report.filled_cells
        );
    }
    Ok((TimeSeriesFrame::from_columns(grid, cols)?, report))
}

/// Replaces every entry rejected by `keep` with a linear interpolation of its
/// nearest kept neighbours (nearest kept value at the edges). Returns false
/// if nothing was kept.
fn fill_by_interpolation(col: &mut [f64], keep: impl Fn(f64) -> bool) -> bool {
    let good: Vec<bool> = col.iter().map(|&v| keep(v)).collect();
    fill_masked(col, &good)
}

fn fill_masked(col: &mut [f64], good: &[bool]) -> bool {
    let anchors: Vec<usize> = (0..col.len()).filter(|&i| good[i]).collect();
    let (Some(&lo), Some(&hi)) = (anchors.first(), anchors.last()) else {
        return false;
    };
    let (first_val, last_val) = (col[lo], col[hi]);
    for v in &mut col[..lo] {
        *v = first_val;
    }
    for v in &mut col[hi + 1..] {
        *v = last_val;
    }
    for w in anchors.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a > 1 {
            let (ya, yb) = (col[a], col[b]);
            let span = (b - a) as f64;
            for i in a + 1..b {
                let frac = (i - a) as f64 / span;
                col[i] = ya + (yb - ya) * frac;
            }
        }
    }
    true
}

/// Outcome of [`zscore_filter`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZScoreReport {
    pub replaced: usize,
    /// Replacement count per column, in frame column order.
    pub per_column: Vec<(String, usize)>,
    /// Columns skipped because their standard deviation is zero.
    pub zero_variance: Vec<String>,
}

/// Replaces values with `|x - mean| / std > threshold` by interpolation
/// between the nearest non-anomalous neighbours. Mean and sample standard
/// deviation are taken per column over the whole frame.
pub fn zscore_filter(frame: &TimeSeriesFrame, threshold: f64) -> Result<(TimeSeriesFrame, ZScoreReport)> {
    let n = frame.len();
    zscore_filter_rows(frame, threshold, 0..n, 0..n)
}

/// Like [`zscore_filter`], but the statistics come only from `stats_rows`
/// and only rows in `apply_rows` are examined or modified. The benchmark
/// uses this to keep held-out rows out of the anomaly statistics.
pub fn zscore_filter_rows(
    frame: &TimeSeriesFrame,
    threshold: f64,
    stats_rows: Range<usize>,
    apply_rows: Range<usize>,
) -> Result<(TimeSeriesFrame, ZScoreReport)> {
    if !(threshold > 0.0) {
        return Err(CoreError::InvalidArgument(format!("z-score threshold must be positive, got {threshold}")));
    }
    frame.ensure_hourly()?;
    for r in [&stats_rows, &apply_rows] {
        if r.start >= r.end || r.end > frame.len() {
            return Err(CoreError::InvalidArgument(format!("row range {}..{} invalid", r.start, r.end)));
        }
    }
    let mut out = frame.clone();
    let mut report = ZScoreReport::default();
    for j in 0..frame.n_cols() {
        let name = &frame.columns()[j];
        let stats: Vec<f64> =
            frame.column_range_at(j, stats_rows.clone()).into_iter().filter(|v| v.is_finite()).collect();
        let Some((mean, std)) = sample_moments(&stats) else {
            report.zero_variance.push(name.clone());
            report.per_column.push((name.clone(), 0));
            continue;
        };
        if std == 0.0 {
            warn!("z-score filter: column {name:?} has zero variance, left untouched");
            report.zero_variance.push(name.clone());
            report.per_column.push((name.clone(), 0));
            continue;
        }
        let mut col = frame.column_range_at(j, apply_rows.clone());
        let good: Vec<bool> = col.iter().map(|&v| !v.is_finite() || ((v - mean) / std).abs() <= threshold).collect();
        let count = good.iter().filter(|g| !**g).count();
        if count > 0 {
            // non-finite entries are not anomalies; keep them out of the anchors
            let anchors: Vec<bool> = col.iter().zip(&good).map(|(v, g)| *g && v.is_finite()).collect();
            let original = col.clone();
            if fill_masked(&mut col, &anchors) {
                for (i, row) in apply_rows.clone().enumerate() {
                    if !good[i] {
                        out.set_value(row, j, col[i]);
                    } else {
                        debug_assert!(original[i].to_bits() == frame.value(row, j).to_bits());
                    }
                }
            }
        }
        report.replaced += count;
        report.per_column.push((name.clone(), count));
    }
    Ok((out, report))
}

/// Mean and sample (n-1) standard deviation; `None` for fewer than two values.
fn sample_moments(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}

//! Correlation, histogram mutual information and greedy mRMR selection.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::TimeSeriesFrame;

/// Pearson correlation with population moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(CoreError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(CoreError::TooFewRows { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CoreError::ConstantColumn("x".into()));
    }
    if syy == 0.0 {
        return Err(CoreError::ConstantColumn("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Named symmetric matrix of pairwise Pearson coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn correlation_matrix(frame: &TimeSeriesFrame, columns: &[impl AsRef<str>]) -> Result<CorrelationMatrix> {
    let data: Vec<Vec<f64>> = columns.iter().map(|c| frame.column(c.as_ref())).collect::<Result<_>>()?;
    let k = data.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                // still validates the column is usable
                pearson(&data[i], &data[i]).map_err(|_| CoreError::ConstantColumn(columns[i].as_ref().to_string()))?;
                1.0
            } else {
                pearson(&data[i], &data[j])?
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), values })
}

/// Equal-width 2-D histogram of paired samples.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    pub bin_edges_x: Vec<f64>,
    pub bin_edges_y: Vec<f64>,
    /// `counts[i][j]` = samples with x in bin i and y in bin j.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl JointHistogram {
    pub fn new(x: &[f64], y: &[f64], bins: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(CoreError::LengthMismatch { left: x.len(), right: y.len() });
        }
        if x.is_empty() {
            return Err(CoreError::Empty);
        }
        if bins < 2 {
            return Err(CoreError::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        let (ex, bx) = equal_width_bins(x, bins)?;
        let (ey, by) = equal_width_bins(y, bins)?;
        let mut counts = vec![vec![0u64; bins]; bins];
        for (i, j) in bx.into_iter().zip(by) {
            counts[i][j] += 1;
        }
        Ok(JointHistogram { bin_edges_x: ex, bin_edges_y: ey, counts, n: x.len() as u64 })
    }

    pub fn marginal_x(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<u64> {
        let bins = self.bin_edges_y.len() - 1;
        (0..bins).map(|j| self.counts.iter().map(|row| row[j]).sum()).collect()
    }

    /// Plug-in mutual information in nats; empty cells contribute nothing.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let px = self.marginal_x();
        let py = self.marginal_y();
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (c * n / (px[i] as f64 * py[j] as f64)).ln();
                }
            }
        }
        mi.max(0.0)
    }
}

/// Shannon entropy (nats) of equal-width binned samples.
pub fn histogram_entropy(x: &[f64], bins: usize) -> Result<f64> {
    if x.is_empty() {
        return Err(CoreError::Empty);
    }
    let (_, idx) = equal_width_bins(x, bins)?;
    let mut counts = vec![0u64; bins];
    for i in idx {
        counts[i] += 1;
    }
    let n = x.len() as f64;
    Ok(-counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n * (c as f64 / n).ln()).sum::<f64>())
}

fn equal_width_bins(x: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x {
        if !v.is_finite() {
            return Err(CoreError::InvalidArgument("non-finite sample".into()));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
    let idx = x
        .iter()
        .map(|&v| if width > 0.0 { (((v - lo) / width).floor() as usize).min(bins - 1) } else { 0 })
        .collect();
    Ok((edges, idx))
}

/// Default bin count: ceil(sqrt(n)), within [2, 64].
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(2, 64)
}

/// Plug-in mutual information (nats) over an equal-width joint histogram.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    Ok(JointHistogram::new(x, y, bins)?.mutual_information())
}

/// One greedy mRMR pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature: String,
    pub relevance: f64,
    /// Mean MI with the features already selected (0 for the first pick).
    pub redundancy: f64,
    pub score: f64,
}

/// Cached pairwise MI between a candidate and a selected feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMi {
    pub feature: String,
    pub selected: String,
    pub mi: f64,
}

/// Result of [`mrmr_select`]: the full candidate set, the greedy picks in
/// order, relevance per candidate and every pairwise MI that was needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub target: String,
    pub bins: usize,
    pub full_set: Vec<String>,
    pub selected: Vec<String>,
    pub relevance: BTreeMap<String, f64>,
    pub redundancy_cache: Vec<PairMi>,
    pub steps: Vec<SelectionStep>,
}

/// Greedy minimum-redundancy maximum-relevance selection (difference form).
///
/// Statistics are computed over `rows` only, which callers set to the
/// training range. Ties go to the earlier candidate. `bins` defaults to
/// [`default_bins`] of the row count.
pub fn mrmr_select(
    frame: &TimeSeriesFrame,
    target: &str,
    candidates: &[impl AsRef<str>],
    k: usize,
    rows: Range<usize>,
    bins: Option<usize>,
) -> Result<SelectionState> {
    if candidates.is_empty() {
        return Err(CoreError::InvalidArgument("no candidate features".into()));
    }
    if k == 0 || k > candidates.len() {
        return Err(CoreError::InvalidArgument(format!("k must be in 1..={}, got {k}", candidates.len())));
    }
    let names: Vec<String> = candidates.iter().map(|c| c.as_ref().to_string()).collect();
    for (i, n) in names.iter().enumerate() {
        if n == target {
            return Err(CoreError::InvalidArgument(format!("target {target:?} listed as a candidate")));
        }
        if names[..i].contains(n) {
            return Err(CoreError::DuplicateColumn(n.clone()));
        }
    }
    let y = frame.column_range(target, rows.clone())?;
    let xs: Vec<Vec<f64>> = names.iter().map(|n| frame.column_range(n, rows.clone())).collect::<Result<_>>()?;
    let bins = bins.unwrap_or_else(|| default_bins(y.len()));

    let relevance: Vec<f64> = xs.par_iter().map(|x| mutual_information(x, &y, bins)).collect::<Result<_>>()?;

    let mut remaining: Vec<usize> = (0..names.len()).collect();
    // redundancy_sum[f] = sum over selected s of I(f; s)
    let mut redundancy_sum = vec![0.0; names.len()];
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut cache = Vec::new();
    let mut steps = Vec::with_capacity(k);

    while selected.len() < k {
        let denom = selected.len().max(1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for (pos, &f) in remaining.iter().enumerate() {
            let score = relevance[f] - redundancy_sum[f] / denom;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((pos, score));
            }
        }
        let (pos, score) = best.expect("remaining is nonempty while selected < k <= candidates");
        let f = remaining.remove(pos);
        steps.push(SelectionStep {
            feature: names[f].clone(),
            relevance: relevance[f],
            redundancy: redundancy_sum[f] / denom,
            score,
        });
        selected.push(f);
        if selected.len() == k {
            break;
        }
        let pair: Vec<f64> =
            remaining.par_iter().map(|&g| mutual_information(&xs[g], &xs[f], bins)).collect::<Result<_>>()?;
        for (&g, mi) in remaining.iter().zip(pair) {
            redundancy_sum[g] += mi;
            cache.push(PairMi { feature: names[g].clone(), selected: names[f].clone(), mi });
        }
    }

    Ok(SelectionState {
        target: target.to_string(),
        bins,
        full_set: names.clone(),
        selected: selected.iter().map(|&i| names[i].clone()).collect(),
        relevance: names.iter().cloned().zip(relevance).collect(),
        redundancy_cache: cache,
        steps,
    })
}

//! Additive trend + seasonality + regressor forecaster.
//!
//! The model is
//!
//! ```text
//! y(t) = g(t) + s(t) + h(t) + e(t)
//! g(t) = m + k t + sum_j delta_j * max(0, t - s_j)
//! s(t) = sum over seasonalities, k = 1..order of a_k sin(2 pi k H / P) + b_k cos(2 pi k H / P)
//! h(t) = sum_r beta_r x_r(t)
//! ```
//!
//! where `t` is time normalized to [0, 1] over the training span, `s_j` are
//! changepoints spread over the first `changepoint_range` of that span, `H`
//! is the absolute hour index (hours since the epoch) and `x_r` are
//! regressors already standardized with the training scaler. All
//! coefficients come out of one ridge least-squares solve; only changepoint
//! deltas (and optionally regressors and Fourier terms) are penalized.

use std::f64::consts::PI;
use std::ops::Range;

use lightcast_core::linalg::solve_ridge;
use lightcast_core::{TimeSeriesFrame, HOUR};
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Average year length in hours.
pub const YEAR_HOURS: f64 = 8766.0;
pub const WEEK_HOURS: f64 = 168.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seasonality {
    pub name: String,
    pub period_hours: f64,
    pub fourier_order: usize,
}

impl Seasonality {
    pub fn new(name: &str, period_hours: f64, fourier_order: usize) -> Self {
        Seasonality { name: name.to_string(), period_hours, fourier_order }
    }

    pub fn weekly() -> Self {
        Self::new("weekly", WEEK_HOURS, 3)
    }

    pub fn yearly() -> Self {
        Self::new("yearly", YEAR_HOURS, 10)
    }

    pub fn daily() -> Self {
        Self::new("daily", 24.0, 4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdditiveConfig {
    pub n_changepoints: usize,
    /// Fraction of the training span that holds changepoints.
    pub changepoint_range: f64,
    pub seasonalities: Vec<Seasonality>,
    pub regressors: Vec<String>,
    /// Ridge weight on changepoint deltas.
    pub trend_penalty: f64,
    pub regressor_penalty: f64,
    pub seasonality_penalty: f64,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        AdditiveConfig {
            n_changepoints: 25,
            changepoint_range: 0.8,
            seasonalities: vec![Seasonality::weekly(), Seasonality::yearly()],
            regressors: Vec::new(),
            trend_penalty: 10.0,
            regressor_penalty: 0.0,
            seasonality_penalty: 0.0,
        }
    }
}

impl AdditiveConfig {
    /// Linear trend only: no changepoints, seasonality or regressors.
    pub fn trend_only() -> Self {
        AdditiveConfig { n_changepoints: 0, seasonalities: Vec::new(), ..Default::default() }
    }

    pub fn with_regressors(mut self, regressors: &[impl AsRef<str>]) -> Self {
        self.regressors = regressors.iter().map(|r| r.as_ref().to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return bad(format!("changepoint_range must be in (0, 1], got {}", self.changepoint_range));
        }
        for (name, v) in [
            ("trend_penalty", self.trend_penalty),
            ("regressor_penalty", self.regressor_penalty),
            ("seasonality_penalty", self.seasonality_penalty),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite nonnegative number, got {v}"));
            }
        }
        for s in &self.seasonalities {
            if !(s.period_hours > 0.0) {
                return bad(format!("seasonality {:?} needs a positive period", s.name));
            }
            if s.fourier_order == 0 {
                return bad(format!("seasonality {:?} needs fourier_order >= 1", s.name));
            }
        }
        for (i, r) in self.regressors.iter().enumerate() {
            if self.regressors[..i].contains(r) {
                return bad(format!("regressor {r:?} listed twice"));
            }
        }
        Ok(())
    }

    /// Changepoint locations in normalized time.
    pub fn changepoints(&self) -> Vec<f64> {
        let n = self.n_changepoints;
        (1..=n).map(|j| self.changepoint_range * j as f64 / n as f64).collect()
    }

    /// Number of design columns.
    pub fn width(&self) -> usize {
        2 + self.n_changepoints
            + self.seasonalities.iter().map(|s| 2 * s.fourier_order).sum::<usize>()
            + self.regressors.len()
    }

    /// Column names in design order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string(), "trend".to_string()];
        names.extend((0..self.n_changepoints).map(|j| format!("changepoint_{j}")));
        for s in &self.seasonalities {
            for k in 1..=s.fourier_order {
                names.push(format!("{}_sin{k}", s.name));
                names.push(format!("{}_cos{k}", s.name));
            }
        }
        names.extend(self.regressors.iter().map(|r| format!("regressor_{r}")));
        names
    }

    pub(crate) fn penalties(&self) -> Vec<f64> {
        let mut p = vec![0.0, 0.0];
        p.extend(std::iter::repeat_n(self.trend_penalty, self.n_changepoints));
        for s in &self.seasonalities {
            p.extend(std::iter::repeat_n(self.seasonality_penalty, 2 * s.fourier_order));
        }
        p.extend(std::iter::repeat_n(self.regressor_penalty, self.regressors.len()));
        p
    }

    /// Writes the design row for one timestamp into `out`.
    fn fill_row(&self, changepoints: &[f64], t: f64, ts: i64, regressors: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = t;
        let mut c = 2;
        for s in changepoints {
            out[c] = (t - s).max(0.0);
            c += 1;
        }
        let hour = (ts as f64) / HOUR as f64;
        for s in &self.seasonalities {
            for k in 1..=s.fourier_order {
                let x = 2.0 * PI * k as f64 * hour / s.period_hours;
                out[c] = x.sin();
                out[c + 1] = x.cos();
                c += 2;
            }
        }
        out[c..c + regressors.len()].copy_from_slice(regressors);
    }
}

/// Maps timestamps to normalized time: 0 at the first training row, 1 at the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    pub start: i64,
    pub span_seconds: f64,
}

impl TimeScale {
    pub fn normalize(&self, ts: i64) -> f64 {
        (ts - self.start) as f64 / self.span_seconds
    }
}

/// Design matrix plus the name of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub columns: Vec<String>,
}

/// Builds the additive design for `rows` of `frame`, with time normalized
/// by `time`. Regressor columns must already be standardized.
pub fn build_design_matrix(
    config: &AdditiveConfig,
    frame: &TimeSeriesFrame,
    rows: Range<usize>,
    time: &TimeScale,
) -> Result<DesignMatrix> {
    config.validate()?;
    if rows.is_empty() {
        return Err(ModelError::InsufficientRows { needed: 0, got: 0 });
    }
    let reg_idx = regressor_indices(frame, &config.regressors)?;
    let cps = config.changepoints();
    let width = config.width();
    let mut matrix = DMatrix::zeros(rows.len(), width);
    let mut buf = vec![0.0; width];
    let mut regs = vec![0.0; reg_idx.len()];
    for (r, i) in rows.enumerate() {
        let ts = frame.timestamps()[i];
        for (k, &j) in reg_idx.iter().enumerate() {
            regs[k] = frame.value(i, j);
        }
        config.fill_row(&cps, time.normalize(ts), ts, &regs, &mut buf);
        for (c, v) in buf.iter().enumerate() {
            matrix[(r, c)] = *v;
        }
    }
    Ok(DesignMatrix { matrix, columns: config.column_names() })
}

fn regressor_indices(frame: &TimeSeriesFrame, regressors: &[String]) -> Result<Vec<usize>> {
    regressors
        .iter()
        .map(|r| frame.column_index(r).map_err(|_| ModelError::MissingRegressor(r.clone())))
        .collect()
}

/// Piecewise-linear trend `g(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub offset: f64,
    pub slope: f64,
    pub changepoints: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl Trend {
    pub fn eval(&self, t: f64) -> f64 {
        let mut g = self.offset + self.slope * t;
        for (s, d) in self.changepoints.iter().zip(&self.deltas) {
            g += d * (t - s).max(0.0);
        }
        g
    }

    /// Slope after the last changepoint, used for extrapolation.
    pub fn final_slope(&self) -> f64 {
        self.slope + self.deltas.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalTerm {
    pub name: String,
    pub period_hours: f64,
    /// Coefficients of sin(2 pi k H / P) for k = 1..=order.
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorCoef {
    pub name: String,
    pub beta: f64,
}

/// Fitted additive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub config: AdditiveConfig,
    pub target: String,
    pub time: TimeScale,
    pub trend: Trend,
    pub seasonal: Vec<SeasonalTerm>,
    pub regressors: Vec<RegressorCoef>,
    /// RMSE of the training residuals.
    pub sigma: f64,
    pub n_train: usize,
    /// Whether rank-deficiency jitter was needed.
    pub jittered: bool,
}

impl AdditiveModel {
    /// Coefficients flattened in design-column order.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut w = vec![self.trend.offset, self.trend.slope];
        w.extend(&self.trend.deltas);
        for s in &self.seasonal {
            for (a, b) in s.sin.iter().zip(&s.cos) {
                w.push(*a);
                w.push(*b);
            }
        }
        w.extend(self.regressors.iter().map(|r| r.beta));
        w
    }

    fn from_coefficients(config: &AdditiveConfig, target: &str, time: TimeScale, w: &[f64]) -> Self {
        let n_cp = config.n_changepoints;
        let trend =
            Trend { offset: w[0], slope: w[1], changepoints: config.changepoints(), deltas: w[2..2 + n_cp].to_vec() };
        let mut c = 2 + n_cp;
        let mut seasonal = Vec::with_capacity(config.seasonalities.len());
        for s in &config.seasonalities {
            let (mut sin, mut cos) = (Vec::new(), Vec::new());
            for _ in 0..s.fourier_order {
                sin.push(w[c]);
                cos.push(w[c + 1]);
                c += 2;
            }
            seasonal.push(SeasonalTerm { name: s.name.clone(), period_hours: s.period_hours, sin, cos });
        }
        let regressors =
            config.regressors.iter().zip(&w[c..]).map(|(n, b)| RegressorCoef { name: n.clone(), beta: *b }).collect();
        AdditiveModel {
            config: config.clone(),
            target: target.to_string(),
            time,
            trend,
            seasonal,
            regressors,
            sigma: 0.0,
            n_train: 0,
            jittered: false,
        }
    }

    /// Predictions at every row of `rows`, which must hold the model's
    /// regressor columns (standardized). The target column is never read.
    pub fn predict(&self, rows: &TimeSeriesFrame) -> Result<Vec<f64>> {
        self.predict_rows(rows, 0..rows.len())
    }

    pub fn predict_rows(&self, frame: &TimeSeriesFrame, rows: Range<usize>) -> Result<Vec<f64>> {
        let reg_idx = regressor_indices(frame, &self.config.regressors)?;
        let w = self.coefficients();
        let cps = &self.trend.changepoints;
        let mut buf = vec![0.0; w.len()];
        let mut regs = vec![0.0; reg_idx.len()];
        let mut out = Vec::with_capacity(rows.len());
        for i in rows {
            let ts = frame.timestamps()[i];
            for (k, &j) in reg_idx.iter().enumerate() {
                let v = frame.value(i, j);
                if !v.is_finite() {
                    return Err(ModelError::MissingRegressor(self.config.regressors[k].clone()));
                }
                regs[k] = v;
            }
            self.config.fill_row(cps, self.time.normalize(ts), ts, &regs, &mut buf);
            out.push(dot(&buf, &w));
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the additive model to `target` over the `train` rows of `frame`.
pub fn fit_additive(
    config: &AdditiveConfig,
    frame: &TimeSeriesFrame,
    target: &str,
    train: Range<usize>,
) -> Result<AdditiveModel> {
    config.validate()?;
    let width = config.width();
    if train.len() <= width {
        return Err(ModelError::InsufficientRows { needed: width, got: train.len() });
    }
    let window = frame.slice_rows(train.clone())?;
    window.ensure_hourly()?;
    let y = frame.column_range(target, train.clone())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("target {target:?} has non-finite training values")));
    }
    let ts = window.timestamps();
    let time = TimeScale { start: ts[0], span_seconds: (ts[ts.len() - 1] - ts[0]) as f64 };
    let design = build_design_matrix(config, &window, 0..window.len(), &time)?;
    let sol = solve_ridge(&design.matrix, &y, &config.penalties())?;
    if sol.jittered {
        warn!("additive fit for {target:?}: design rank deficient, jitter added");
    }
    let mut model = AdditiveModel::from_coefficients(config, target, time, &sol.coef);
    let fitted = model.predict(&window)?;
    let sse: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    model.sigma = (sse / y.len() as f64).sqrt();
    model.n_train = y.len();
    model.jittered = sol.jittered;
    Ok(model)
}

pub(crate) fn penalties_of(config: &AdditiveConfig) -> Vec<f64> {
    config.penalties()
}

pub(crate) fn fit_from_coefficients(config: &AdditiveConfig, target: &str, time: TimeScale, w: &[f64]) -> AdditiveModel {
    AdditiveModel::from_coefficients(config, target, time, w)
}

/// Forecast for the horizon rows (timestamps plus standardized regressors).
pub fn predict_additive(model: &AdditiveModel, horizon: &TimeSeriesFrame) -> Result<Vec<f64>> {
    model.predict(horizon)
}

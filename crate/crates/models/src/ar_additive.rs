//! Additive model extended with autoregressive target lags and lagged
//! regressors, fitted jointly by one ridge solve and forecast recursively.
//!
//! `y(t) = T(t) + S(t) + E(t) + A(t) + F(t) + L(t)`: trend, seasonality and
//! contemporaneous ("future") regressors come from [`AdditiveModel`]; `A(t)`
//! is a linear combination of `y(t-1) .. y(t-n_lags)`; `L(t)` of regressor
//! values at lags `1..=regressor_lags`. There are no event terms, so `E(t)`
//! is identically zero.

use std::ops::Range;

use lightcast_core::linalg::solve_ridge;
use lightcast_core::TimeSeriesFrame;
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::additive::{build_design_matrix, AdditiveConfig, AdditiveModel, RegressorCoef, TimeScale};
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArAdditiveConfig {
    pub base: AdditiveConfig,
    pub n_lags: usize,
    /// 0 keeps regressors contemporaneous only.
    pub regressor_lags: usize,
    pub ar_penalty: f64,
}

impl Default for ArAdditiveConfig {
    fn default() -> Self {
        ArAdditiveConfig { base: AdditiveConfig::default(), n_lags: 7, regressor_lags: 0, ar_penalty: 0.0 }
    }
}

impl ArAdditiveConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_lags == 0 {
            return Err(ModelError::InvalidConfig("n_lags must be at least 1".into()));
        }
        if !(self.ar_penalty >= 0.0) {
            return Err(ModelError::InvalidConfig("ar_penalty must be nonnegative".into()));
        }
        Ok(())
    }

    fn max_lag(&self) -> usize {
        self.n_lags.max(self.regressor_lags)
    }

    pub fn width(&self) -> usize {
        self.base.width() + self.n_lags + self.regressor_lags * self.base.regressors.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaggedRegressorCoef {
    pub name: String,
    pub lag: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArAdditiveModel {
    pub config: ArAdditiveConfig,
    /// Trend, seasonality and contemporaneous regressors.
    pub additive: AdditiveModel,
    /// Weights on y(t-1), ..., y(t-n_lags).
    pub ar: Vec<f64>,
    pub lagged_regressors: Vec<LaggedRegressorCoef>,
    /// Event effects; always empty.
    pub events: Vec<RegressorCoef>,
}

impl ArAdditiveModel {
    pub fn n_lags(&self) -> usize {
        self.ar.len()
    }

    fn max_lag(&self) -> usize {
        self.config.max_lag()
    }

    fn lagged_terms(&self, lag_value_of: impl Fn(&str, usize) -> f64) -> f64 {
        self.lagged_regressors.iter().map(|c| c.beta * lag_value_of(&c.name, c.lag)).sum()
    }

    /// One-step-ahead predictions for `rows`, reading observed target and
    /// regressor lags from `frame`.
    pub fn predict_one_step(&self, frame: &TimeSeriesFrame, rows: Range<usize>) -> Result<Vec<f64>> {
        if rows.start < self.max_lag() {
            return Err(ModelError::ShortHistory { needed: self.max_lag(), got: rows.start });
        }
        let target = frame.column_index(&self.additive.target)?;
        let base = self.additive.predict_rows(frame, rows.clone())?;
        let reg_cols = self.lagged_columns(frame)?;
        let mut out = Vec::with_capacity(base.len());
        for (k, i) in rows.enumerate() {
            let ar: f64 = self.ar.iter().enumerate().map(|(l, a)| a * frame.value(i - l - 1, target)).sum();
            let lagged = self.lagged_terms(|name, lag| frame.value(i - lag, reg_cols[name]));
            out.push(base[k] + ar + lagged);
        }
        Ok(out)
    }

    fn lagged_columns<'a>(&'a self, frame: &TimeSeriesFrame) -> Result<std::collections::HashMap<&'a str, usize>> {
        self.lagged_regressors
            .iter()
            .map(|c| {
                frame.column_index(&c.name).map(|j| (c.name.as_str(), j)).map_err(|_| ModelError::MissingRegressor(c.name.clone()))
            })
            .collect()
    }
}

/// Fits trend, seasonality, regressors, AR lags and lagged regressors in one
/// ridge solve. The first `max(n_lags, regressor_lags)` training rows only
/// supply lags.
pub fn fit_ar_additive(
    config: &ArAdditiveConfig,
    frame: &TimeSeriesFrame,
    target: &str,
    train: Range<usize>,
) -> Result<ArAdditiveModel> {
    config.validate()?;
    let max_lag = config.max_lag();
    let width = config.width();
    if train.len() <= max_lag + width {
        return Err(ModelError::InsufficientRows { needed: max_lag + width, got: train.len() });
    }
    let window = frame.slice_rows(train.clone())?;
    window.ensure_hourly()?;
    let ts = window.timestamps();
    let time = TimeScale { start: ts[0], span_seconds: (ts[ts.len() - 1] - ts[0]) as f64 };
    let fit_rows = max_lag..window.len();
    let base = build_design_matrix(&config.base, &window, fit_rows.clone(), &time)?;

    let y_all = window.column(target)?;
    if y_all.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("target {target:?} has non-finite training values")));
    }
    let reg_idx: Vec<usize> = config
        .base
        .regressors
        .iter()
        .map(|r| window.column_index(r).map_err(|_| ModelError::MissingRegressor(r.clone())))
        .collect::<Result<_>>()?;

    let n = fit_rows.len();
    let base_w = config.base.width();
    let mut x = DMatrix::zeros(n, width);
    x.view_mut((0, 0), (n, base_w)).copy_from(&base.matrix);
    for (r, i) in fit_rows.clone().enumerate() {
        for l in 1..=config.n_lags {
            x[(r, base_w + l - 1)] = y_all[i - l];
        }
        let mut c = base_w + config.n_lags;
        for &j in &reg_idx {
            for l in 1..=config.regressor_lags {
                x[(r, c)] = window.value(i - l, j);
                c += 1;
            }
        }
    }
    for c in base_w..width {
        let col = x.column(c);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            return Err(ModelError::DegenerateDesign(format!(
                "lag column {} is constant and collinear with the intercept",
                c - base_w
            )));
        }
    }

    let y = &y_all[fit_rows.clone()];
    let mut penalties = config.base_penalties();
    penalties.extend(std::iter::repeat_n(config.ar_penalty, config.n_lags));
    penalties.extend(std::iter::repeat_n(config.base.regressor_penalty, width - base_w - config.n_lags));
    let sol = solve_ridge(&x, y, &penalties)?;
    if sol.jittered {
        warn!("AR-additive fit for {target:?}: design rank deficient, jitter added");
    }

    let mut additive = crate::additive::fit_from_coefficients(&config.base, target, time, &sol.coef[..base_w]);
    additive.jittered = sol.jittered;
    let ar = sol.coef[base_w..base_w + config.n_lags].to_vec();
    let mut lagged_regressors = Vec::new();
    let mut c = base_w + config.n_lags;
    for name in &config.base.regressors {
        for lag in 1..=config.regressor_lags {
            lagged_regressors.push(LaggedRegressorCoef { name: name.clone(), lag, beta: sol.coef[c] });
            c += 1;
        }
    }
    let mut model = ArAdditiveModel { config: config.clone(), additive, ar, lagged_regressors, events: Vec::new() };
    let fitted = model.predict_one_step(&window, fit_rows)?;
    let sse: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    model.additive.sigma = (sse / n as f64).sqrt();
    model.additive.n_train = n;
    Ok(model)
}

impl ArAdditiveConfig {
    fn base_penalties(&self) -> Vec<f64> {
        crate::additive::penalties_of(&self.base)
    }
}

/// Recursive multi-step forecast over the horizon rows.
///
/// `target_tail` holds the last observed target values before the horizon,
/// oldest first; at least `n_lags` are needed. `regressor_tail` supplies the
/// regressor rows just before the horizon when lagged regressors are on.
/// Step `h` uses observed lags while they exist and earlier forecasts after.
pub fn predict_ar_additive(
    model: &ArAdditiveModel,
    horizon: &TimeSeriesFrame,
    target_tail: &[f64],
    regressor_tail: Option<&TimeSeriesFrame>,
) -> Result<Vec<f64>> {
    let p = model.n_lags();
    if target_tail.len() < p {
        return Err(ModelError::ShortHistory { needed: p, got: target_tail.len() });
    }
    let base = model.additive.predict(horizon)?;
    let reg_lag = model.config.regressor_lags;
    let tail_cols = if model.lagged_regressors.is_empty() {
        None
    } else {
        let tail = regressor_tail.ok_or(ModelError::ShortHistory { needed: reg_lag, got: 0 })?;
        if tail.len() < reg_lag {
            return Err(ModelError::ShortHistory { needed: reg_lag, got: tail.len() });
        }
        Some((tail, model.lagged_columns(tail)?))
    };
    let horizon_cols = model.lagged_columns(horizon)?;
    let mut out: Vec<f64> = Vec::with_capacity(base.len());
    for (h, b) in base.iter().enumerate() {
        let ar: f64 = model
            .ar
            .iter()
            .enumerate()
            .map(|(l, a)| {
                let lag = l + 1;
                let v = if h >= lag { out[h - lag] } else { target_tail[target_tail.len() - (lag - h)] };
                a * v
            })
            .sum();
        let lagged = model.lagged_terms(|name, lag| {
            if h >= lag {
                horizon.value(h - lag, horizon_cols[name])
            } else {
                let (tail, cols) = tail_cols.as_ref().expect("checked above");
                tail.value(tail.len() - (lag - h), cols[name])
            }
        });
        out.push(b + ar + lagged);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::additive::{fit_additive, predict_additive, Seasonality};
    use lightcast_core::HOUR;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn hourly(cols: Vec<(&str, Vec<f64>)>) -> TimeSeriesFrame {
        let n = cols[0].1.len();
        TimeSeriesFrame::from_columns((0..n as i64).map(|i| i * HOUR).collect(), cols).unwrap()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Normal::new(0.0, 1.0).unwrap();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = phi * y[t - 1] + e.sample(&mut rng);
        }
        y
    }

    fn plain_ar(n_lags: usize) -> ArAdditiveConfig {
        ArAdditiveConfig { base: AdditiveConfig::trend_only(), n_lags, ..Default::default() }
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let f = hourly(vec![("y", ar1(5000, 0.8, 5))]);
        let m = fit_ar_additive(&ArAdditiveConfig::default(), &f, "y", 0..5000).unwrap();
        assert!((m.ar[0] - 0.8).abs() < 0.05, "{}", m.ar[0]);
        assert!(m.events.is_empty());
    }

    #[test]
    fn constant_series_is_degenerate() {
        let f = hourly(vec![("y", vec![4.0; 200])]);
        assert!(matches!(fit_ar_additive(&plain_ar(1), &f, "y", 0..200), Err(ModelError::DegenerateDesign(_))));
    }

    #[test]
    fn seasonal_series_has_no_ar_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..5000)
            .map(|h| 5.0 * (2.0 * std::f64::consts::PI * h as f64 / 168.0).sin() + e.sample(&mut rng))
            .collect();
        let f = hourly(vec![("y", y)]);
        let cfg = ArAdditiveConfig {
            base: AdditiveConfig { seasonalities: vec![Seasonality::weekly()], ..Default::default() },
            ..Default::default()
        };
        let m = fit_ar_additive(&cfg, &f, "y", 0..5000).unwrap();
        for a in &m.ar {
            assert!(a.abs() < 0.05, "{a}");
        }
    }

    #[test]
    fn one_step_horizon_matches_linear_prediction() {
        let f = hourly(vec![("y", ar1(600, 0.5, 1))]);
        let m = fit_ar_additive(&plain_ar(3), &f, "y", 0..500).unwrap();
        let tail = f.column_range("y", 497..500).unwrap();
        let fc = predict_ar_additive(&m, &f.slice_rows(500..501).unwrap(), &tail, None).unwrap();
        let one = m.predict_one_step(&f, 500..501).unwrap();
        assert!((fc[0] - one[0]).abs() < 1e-12);
    }

    #[test]
    fn closed_form_decay() {
        let f = hourly(vec![("y", ar1(300, 0.7, 2))]);
        let mut m = fit_ar_additive(&plain_ar(1), &f, "y", 0..300).unwrap();
        m.additive.trend.offset = 0.0;
        m.additive.trend.slope = 0.0;
        m.ar = vec![0.9];
        let y0 = 3.5;
        let horizon = hourly(vec![("y", vec![0.0; 50])]);
        let fc = predict_ar_additive(&m, &horizon, &[y0], None).unwrap();
        for (h, v) in fc.iter().enumerate() {
            assert!((v - 0.9f64.powi(h as i32 + 1) * y0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_ar_reduces_to_additive() {
        let f = hourly(vec![("y", ar1(400, 0.3, 3)), ("x", ar1(400, 0.9, 4))]);
        let cfg = ArAdditiveConfig {
            base: AdditiveConfig { n_changepoints: 3, ..AdditiveConfig::trend_only() }.with_regressors(&["x"]),
            n_lags: 2,
            ..Default::default()
        };
        let mut m = fit_ar_additive(&cfg, &f, "y", 0..300).unwrap();
        m.ar = vec![0.0, 0.0];
        let horizon = f.slice_rows(300..400).unwrap().select(&["x"]).unwrap();
        let a = predict_ar_additive(&m, &horizon, &[1.0, 2.0], None).unwrap();
        let b = predict_additive(&m.additive, &horizon).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lag_design_beats_nested_additive() {
        let y = ar1(2000, 0.6, 8);
        let f = hourly(vec![("y", y.clone())]);
        let cfg = plain_ar(7);
        let m = fit_ar_additive(&cfg, &f, "y", 0..2000).unwrap();
        let nested = fit_additive(&cfg.base, &f, "y", 7..2000).unwrap();
        assert!(m.additive.sigma <= nested.sigma);
    }

    #[test]
    fn lagged_regressors_enter_the_design() {
        let x = ar1(3000, 0.5, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let e = Normal::new(0.0, 0.1).unwrap();
        let mut y = vec![0.0; 3000];
        for t in 2..3000 {
            y[t] = 0.5 * y[t - 1] + 2.0 * x[t - 2] + e.sample(&mut rng);
        }
        let f = hourly(vec![("y", y), ("x", x)]);
        let cfg = ArAdditiveConfig {
            base: AdditiveConfig::trend_only().with_regressors(&["x"]),
            n_lags: 1,
            regressor_lags: 2,
            ..Default::default()
        };
        let m = fit_ar_additive(&cfg, &f, "y", 0..2900).unwrap();
        assert!((m.ar[0] - 0.5).abs() < 0.02);
        let lag2 = m.lagged_regressors.iter().find(|c| c.lag == 2).unwrap();
        assert!((lag2.beta - 2.0).abs() < 0.02);
        let tail = f.slice_rows(2898..2900).unwrap();
        let horizon = f.slice_rows(2900..2901).unwrap().select(&["x"]).unwrap();
        let fc = predict_ar_additive(&m, &horizon, &f.column_range("y", 2899..2900).unwrap(), Some(&tail)).unwrap();
        let one = m.predict_one_step(&f, 2900..2901).unwrap();
        assert!((fc[0] - one[0]).abs() < 1e-12);
    }

    #[test]
    fn short_tail_rejected() {
        let f = hourly(vec![("y", ar1(200, 0.5, 1))]);
        let m = fit_ar_additive(&plain_ar(3), &f, "y", 0..200).unwrap();
        let horizon = hourly(vec![("y", vec![0.0; 5])]);
        assert!(matches!(predict_ar_additive(&m, &horizon, &[1.0], None), Err(ModelError::ShortHistory { .. })));
    }

    #[test]
    fn recursion_is_deterministic() {
        let f = hourly(vec![("y", ar1(1000, 0.8, 6))]);
        let m = fit_ar_additive(&ArAdditiveConfig::default(), &f, "y", 0..800).unwrap();
        let tail = f.column_range("y", 793..800).unwrap();
        let horizon = f.slice_rows(800..968).unwrap();
        let a = predict_ar_additive(&m, &horizon, &tail, None).unwrap();
        let b = predict_ar_additive(&m, &horizon, &tail, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 168);
    }
}

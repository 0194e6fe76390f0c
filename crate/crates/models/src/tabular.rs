//! Lag, regressor and calendar features for the tree model, and its
//! recursive multi-step forecast.

use std::ops::Range;

use lightcast_core::frame::{day_of_week, hour_of_day};
use lightcast_core::TimeSeriesFrame;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::gbt::{fit_gbt, FeatureMatrix, FeatureRecipe, GbtConfig, GbtEnsemble};

/// Features for the rows of a frame that have every lag available.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularData {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
    pub timestamps: Vec<i64>,
}

pub fn feature_names(recipe: &FeatureRecipe, regressors: &[String]) -> Vec<String> {
    let mut names: Vec<String> = recipe.lags.iter().map(|l| format!("lag_{l}")).collect();
    names.extend(regressors.iter().cloned());
    if recipe.hour_of_day {
        names.push("hour_of_day".into());
    }
    if recipe.day_of_week {
        names.push("day_of_week".into());
    }
    names
}

fn push_row(out: &mut Vec<f64>, recipe: &FeatureRecipe, lag: impl Fn(usize) -> f64, regs: impl Iterator<Item = f64>, ts: i64) {
    out.extend(recipe.lags.iter().map(|&l| lag(l)));
    out.extend(regs);
    if recipe.hour_of_day {
        out.push(hour_of_day(ts) as f64);
    }
    if recipe.day_of_week {
        out.push(day_of_week(ts) as f64);
    }
}

/// Builds features for `rows`. Lags may reach back before `rows.start`;
/// rows whose lags would fall before the frame start are dropped.
pub fn build_tabular_features(
    frame: &TimeSeriesFrame,
    target: &str,
    regressors: &[String],
    recipe: &FeatureRecipe,
    rows: Range<usize>,
) -> Result<TabularData> {
    recipe.validate()?;
    frame.ensure_hourly()?;
    let max_lag = recipe.max_lag();
    let first = rows.start.max(max_lag);
    if first >= rows.end {
        return Err(ModelError::InsufficientRows { needed: max_lag + 1, got: rows.end });
    }
    let y = frame.column(target)?;
    let reg_idx: Vec<usize> = regressors
        .iter()
        .map(|r| frame.column_index(r).map_err(|_| ModelError::MissingRegressor(r.clone())))
        .collect::<Result<_>>()?;
    let mut data = Vec::new();
    for t in first..rows.end {
        push_row(&mut data, recipe, |l| y[t - l], reg_idx.iter().map(|&j| frame.value(t, j)), frame.timestamps()[t]);
    }
    Ok(TabularData {
        x: FeatureMatrix::new(feature_names(recipe, regressors), data)?,
        y: y[first..rows.end].to_vec(),
        timestamps: frame.timestamps()[first..rows.end].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub target: String,
    pub regressors: Vec<String>,
    pub recipe: FeatureRecipe,
    pub ensemble: GbtEnsemble,
}

/// Fits on `train` rows, using `val` rows (whose lags may reach into train)
/// for early stopping.
pub fn fit_gbt_model(
    config: &GbtConfig,
    frame: &TimeSeriesFrame,
    target: &str,
    regressors: &[String],
    train: Range<usize>,
    val: Option<Range<usize>>,
) -> Result<GbtModel> {
    let tr = build_tabular_features(&frame.slice_rows(0..train.end)?, target, regressors, &config.recipe, train.clone())?;
    let va = match val {
        Some(v) if config.early_stopping_rounds > 0 => {
            if v.start != train.end {
                return Err(ModelError::InvalidConfig("validation rows must follow the training rows".into()));
            }
            Some(build_tabular_features(&frame.slice_rows(0..v.end)?, target, regressors, &config.recipe, v)?)
        }
        _ => None,
    };
    let ensemble = fit_gbt(config, &tr.x, &tr.y, va.as_ref().map(|d| (&d.x, d.y.as_slice())))?;
    Ok(GbtModel { target: target.to_string(), regressors: regressors.to_vec(), recipe: config.recipe.clone(), ensemble })
}

impl GbtModel {
    /// One-step predictions for `rows` with observed lags.
    pub fn predict_one_step(&self, frame: &TimeSeriesFrame, rows: Range<usize>) -> Result<(Vec<i64>, Vec<f64>)> {
        let d = build_tabular_features(frame, &self.target, &self.regressors, &self.recipe, rows)?;
        let p = crate::gbt::predict_gbt(&self.ensemble, &d.x)?;
        Ok((d.timestamps, p))
    }

    /// Recursive forecast over `horizon` (regressor columns only), feeding
    /// each prediction back as a lag. `target_tail` holds the most recent
    /// observed target values, oldest first.
    pub fn forecast(&self, target_tail: &[f64], horizon: &TimeSeriesFrame) -> Result<Vec<f64>> {
        let max_lag = self.recipe.max_lag();
        if target_tail.len() < max_lag {
            return Err(ModelError::ShortHistory { needed: max_lag, got: target_tail.len() });
        }
        let reg_idx: Vec<usize> = self
            .regressors
            .iter()
            .map(|r| horizon.column_index(r).map_err(|_| ModelError::MissingRegressor(r.clone())))
            .collect::<Result<_>>()?;
        let mut buf = target_tail.to_vec();
        let mut out = Vec::with_capacity(horizon.len());
        let mut row = Vec::with_capacity(self.ensemble.feature_names.len());
        for t in 0..horizon.len() {
            row.clear();
            let m = buf.len();
            push_row(&mut row, &self.recipe, |l| buf[m - l], reg_idx.iter().map(|&j| horizon.value(t, j)), horizon.timestamps()[t]);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(format!("horizon row {t}")));
            }
            let p = self.ensemble.predict_row(&row);
            out.push(p);
            buf.push(p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lightcast_core::frame::parse_timestamp;
    use lightcast_core::HOUR;

    fn frame(n: usize, start: i64) -> TimeSeriesFrame {
        let ts = (0..n as i64).map(|i| start + i * HOUR).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() * 10.0 + 20.0).collect();
        let x: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        TimeSeriesFrame::from_columns(ts, vec![("y", y), ("x", x)]).unwrap()
    }

    #[test]
    fn lag_trimming_and_shift() {
        let f = frame(50, 0);
        let one = FeatureRecipe { lags: vec![1], hour_of_day: false, day_of_week: false };
        assert_eq!(build_tabular_features(&f, "y", &[], &one, 0..50).unwrap().x.n_rows, 49);
        let d = build_tabular_features(&f, "y", &["x".into()], &FeatureRecipe::default(), 0..50).unwrap();
        let y = f.column("y").unwrap();
        let c24 = d.x.names.iter().position(|n| n == "lag_24").unwrap();
        for (k, ts) in d.timestamps.iter().enumerate() {
            let t = f.row_of(*ts).unwrap();
            assert_eq!(d.x.row(k)[c24], y[t - 24]);
            assert_eq!(d.y[k], y[t]);
        }
        assert!(build_tabular_features(&f.slice_rows(0..20).unwrap(), "y", &[], &FeatureRecipe::default(), 0..20).is_err());
    }

    #[test]
    fn calendar_features() {
        let start = parse_timestamp("2021-01-01T04:00:00Z").unwrap();
        let f = frame(3, start);
        let r = FeatureRecipe { lags: vec![1], hour_of_day: true, day_of_week: true };
        let d = build_tabular_features(&f, "y", &[], &r, 0..3).unwrap();
        assert_eq!(d.x.row(0)[1], 5.0);
        // 2021-01-01 was a Friday
        assert_eq!(d.x.row(0)[2], 4.0);
    }

    #[test]
    fn recursive_forecast_feeds_back() {
        let f = frame(600, 0);
        let cfg = GbtConfig { max_rounds: 50, early_stopping_rounds: 0, ..Default::default() };
        let regs = vec!["x".to_string()];
        let m = fit_gbt_model(&cfg, &f, "y", &regs, 0..500, None).unwrap();
        let y = f.column("y").unwrap();
        let horizon = f.slice_rows(500..510).unwrap().select(&["x"]).unwrap();
        let fc = m.forecast(&y[..500], &horizon).unwrap();
        let (_, one) = m.predict_one_step(&f, 500..501).unwrap();
        assert_eq!(fc[0], one[0]);
        assert_eq!(fc.len(), 10);
        assert!(matches!(m.forecast(&y[..3], &horizon), Err(ModelError::ShortHistory { .. })));
        let no_x = f.slice_rows(500..510).unwrap().select(&["y"]).unwrap();
        assert!(matches!(m.forecast(&y[..500], &no_x), Err(ModelError::MissingRegressor(_))));
    }

    #[test]
    fn early_stopping_on_following_rows() {
        let f = frame(800, 0);
        let m = fit_gbt_model(&GbtConfig::default(), &f, "y", &[], 0..600, Some(600..700)).unwrap();
        assert!(m.ensemble.best_round <= 500);
        assert!(fit_gbt_model(&GbtConfig::default(), &f, "y", &[], 0..600, Some(650..700)).is_err());
    }
}

//! One interface over the four model families, plus the JSON model document.
//!
//! A [`Forecaster`] owns the train-only regressor scaler and the fitted model.
//! Forecasts take the observed history and a horizon frame; only the
//! regressor columns of the horizon are ever looked at, so future target
//! values cannot reach a model even if the caller passes them.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use lightcast_core::{Scaler, TimeSeriesFrame, HOUR};
use serde::{Deserialize, Serialize};

use crate::additive::{fit_additive, predict_additive, AdditiveConfig, AdditiveModel};
use crate::ar_additive::{fit_ar_additive, predict_ar_additive, ArAdditiveConfig, ArAdditiveModel};
use crate::error::{ModelError, Result};
use crate::gbt::GbtConfig;
use crate::sarimax::{fit_sarimax, forecast_sarimax, SarimaxConfig, SarimaxParams};
use crate::tabular::{fit_gbt_model, GbtModel};

pub const DOCUMENT_VERSION: u32 = 1;

/// Model families, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fbp,
    Np,
    Sarimax,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Fbp, ModelKind::Np, ModelKind::Sarimax, ModelKind::Gbt];

    /// Short lowercase id used on the command line and in file names.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Fbp => "fbp",
            ModelKind::Np => "np",
            ModelKind::Sarimax => "sarimax",
            ModelKind::Gbt => "gbt",
        }
    }

    /// Label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Fbp => "FBP",
            ModelKind::Np => "NP",
            ModelKind::Sarimax => "SARIMAX",
            ModelKind::Gbt => "GBT",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s) || k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::InvalidConfig(format!("unknown model {s:?} (expected fbp, np, sarimax or gbt)")))
    }
}

/// Per-family settings. Regressor lists inside these are overwritten by the
/// forecaster's own list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfigs {
    pub fbp: AdditiveConfig,
    pub np: ArAdditiveConfig,
    pub sarimax: SarimaxConfig,
    pub gbt: GbtConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum FittedModel {
    Fbp(AdditiveModel),
    Np(ArAdditiveModel),
    Sarimax(SarimaxParams),
    Gbt(GbtModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Fbp(_) => ModelKind::Fbp,
            FittedModel::Np(_) => ModelKind::Np,
            FittedModel::Sarimax(_) => ModelKind::Sarimax,
            FittedModel::Gbt(_) => ModelKind::Gbt,
        }
    }
}

/// Predictions aligned to the timestamps they are for.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
}

/// Serialized form of a [`Forecaster`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub target: String,
    pub regressors: Vec<String>,
    pub scaler: Scaler,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub target: String,
    pub regressors: Vec<String>,
    pub scaler: Scaler,
    pub model: FittedModel,
}

impl Forecaster {
    /// Fits `kind` on the `train` rows of `frame`. `val` rows, when given,
    /// are used only by the tree model's early stopping. Regressors are
    /// standardized with statistics from `train` alone.
    pub fn fit(
        kind: ModelKind,
        configs: &ModelConfigs,
        frame: &TimeSeriesFrame,
        target: &str,
        regressors: &[String],
        train: Range<usize>,
        val: Option<Range<usize>>,
    ) -> Result<Forecaster> {
        if regressors.iter().any(|r| r == target) {
            return Err(ModelError::InvalidConfig(format!("target {target:?} cannot be its own regressor")));
        }
        let scaler = if regressors.is_empty() { Scaler::identity() } else { Scaler::fit(frame, train.clone(), regressors)? };
        let mut cols: Vec<String> = vec![target.to_string()];
        cols.extend(regressors.iter().cloned());
        let scaled = scaler.transform(&frame.select(&cols)?)?;
        let model = match kind {
            ModelKind::Fbp => {
                let cfg = configs.fbp.clone().with_regressors(regressors);
                FittedModel::Fbp(fit_additive(&cfg, &scaled, target, train)?)
            }
            ModelKind::Np => {
                let mut cfg = configs.np.clone();
                cfg.base = cfg.base.with_regressors(regressors);
                FittedModel::Np(fit_ar_additive(&cfg, &scaled, target, train)?)
            }
            ModelKind::Sarimax => FittedModel::Sarimax(fit_sarimax(&configs.sarimax, &scaled, target, regressors, train)?),
            ModelKind::Gbt => FittedModel::Gbt(fit_gbt_model(&configs.gbt, &scaled, target, regressors, train, val)?),
        };
        Ok(Forecaster { target: target.to_string(), regressors: regressors.to_vec(), scaler, model })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    fn scaled_regressors(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        for r in &self.regressors {
            if !frame.has_column(r) {
                return Err(ModelError::MissingRegressor(r.clone()));
            }
        }
        Ok(self.scaler.transform(&frame.select(&self.regressors)?)?)
    }

    fn target_tail(&self, history: &TimeSeriesFrame, n: usize) -> Result<Vec<f64>> {
        if history.len() < n {
            return Err(ModelError::ShortHistory { needed: n, got: history.len() });
        }
        Ok(history.column_range(&self.target, history.len() - n..history.len())?)
    }

    /// Multi-step forecast for every row of `horizon`, which must start one
    /// hour after the last row of `history`. Only regressor columns of
    /// `horizon` are read.
    pub fn forecast(&self, history: &TimeSeriesFrame, horizon: &TimeSeriesFrame) -> Result<Vec<f64>> {
        if horizon.is_empty() {
            return Err(ModelError::InvalidConfig("horizon must be at least one step".into()));
        }
        if history.is_empty() {
            return Err(ModelError::ShortHistory { needed: 1, got: 0 });
        }
        let expected = history.timestamps()[history.len() - 1] + HOUR;
        if horizon.timestamps()[0] != expected {
            return Err(ModelError::NotContiguous { expected, got: horizon.timestamps()[0] });
        }
        horizon.ensure_hourly()?;
        let future = self.scaled_regressors(horizon)?;
        match &self.model {
            FittedModel::Fbp(m) => predict_additive(m, &future),
            FittedModel::Np(m) => {
                let tail = self.target_tail(history, m.n_lags())?;
                let reg_tail = self.scaled_regressors(history)?;
                predict_ar_additive(m, &future, &tail, Some(&reg_tail))
            }
            FittedModel::Sarimax(p) => {
                let state = match history.row_of(p.last_timestamp) {
                    Some(i) if i + 1 < history.len() => {
                        let mut cols = vec![self.target.clone()];
                        cols.extend(self.regressors.iter().cloned());
                        let observed = self.scaler.transform(&history.select(&cols)?)?;
                        p.advance(&observed, i + 1..history.len())?.0
                    }
                    Some(_) => p.clone(),
                    None if history.timestamps()[history.len() - 1] == p.last_timestamp => p.clone(),
                    None => {
                        return Err(ModelError::NotContiguous {
                            expected: p.last_timestamp,
                            got: history.timestamps()[history.len() - 1],
                        })
                    }
                };
                forecast_sarimax(&state, &future)
            }
            FittedModel::Gbt(m) => {
                let tail = self.target_tail(history, m.recipe.max_lag())?;
                m.forecast(&tail, &future)
            }
        }
    }

    /// In-sample predictions over `rows` of `frame`. Autoregressive models
    /// predict one step ahead from observed lags and skip rows without a
    /// full set of lags.
    pub fn predict_in_sample(&self, frame: &TimeSeriesFrame, rows: Range<usize>) -> Result<Predictions> {
        let mut cols = vec![self.target.clone()];
        cols.extend(self.regressors.iter().cloned());
        let scaled = self.scaler.transform(&frame.select(&cols)?)?;
        let ts = frame.timestamps();
        match &self.model {
            FittedModel::Fbp(m) => {
                Ok(Predictions { timestamps: ts[rows.clone()].to_vec(), values: m.predict_rows(&scaled, rows)? })
            }
            FittedModel::Np(m) => {
                let first = rows.start.max(m.config.n_lags.max(m.config.regressor_lags));
                Ok(Predictions { timestamps: ts[first..rows.end].to_vec(), values: m.predict_one_step(&scaled, first..rows.end)? })
            }
            FittedModel::Sarimax(p) => {
                Ok(Predictions { timestamps: ts[rows.clone()].to_vec(), values: p.fitted(&scaled, rows)? })
            }
            FittedModel::Gbt(m) => {
                let (timestamps, values) = m.predict_one_step(&scaled, rows)?;
                Ok(Predictions { timestamps, values })
            }
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: DOCUMENT_VERSION,
            target: self.target.clone(),
            regressors: self.regressors.clone(),
            scaler: self.scaler.clone(),
            model: self.model.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Forecaster> {
        if doc.format_version != DOCUMENT_VERSION {
            return Err(ModelError::Document(format!(
                "unsupported format_version {} (expected {DOCUMENT_VERSION})",
                doc.format_version
            )));
        }
        if doc.scaler.columns.iter().any(|c| !doc.regressors.contains(c)) {
            return Err(ModelError::Document("scaler covers a column that is not a regressor".into()));
        }
        Ok(Forecaster { target: doc.target, regressors: doc.regressors, scaler: doc.scaler, model: doc.model })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Forecaster> {
        Forecaster::from_document(serde_json::from_str(s)?)
    }
}

//! Forecasting models for hourly pollutant series.

pub mod additive;
pub mod ar_additive;
pub mod error;
pub mod forecaster;
pub mod gbt;
pub mod nelder_mead;
pub mod sarimax;
pub mod tabular;

pub use error::{ModelError, Result};
pub use forecaster::{FittedModel, Forecaster, ModelConfigs, ModelDocument, ModelKind, Predictions};

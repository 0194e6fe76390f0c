//! Core data model for hourly air-quality forecasting.
//!
//! Everything in the pipeline passes around a [`TimeSeriesFrame`]: an hourly,
//! UTC-indexed matrix of named variables. This crate owns the frame, the
//! preprocessing steps that make a raw frame usable (grid enforcement,
//! anomaly filtering), the chronological split and train-only scaler, the
//! feature selection statistics, the evaluation metrics and the ridge solver
//! shared by the linear forecasters.

pub mod error;
pub mod featsel;
pub mod frame;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod scaler;
pub mod split;

pub use error::{CoreError, Result};
pub use frame::{TimeSeriesFrame, HOUR};
pub use preprocess::{enforce_hourly_grid, zscore_filter, GridReport, ZScoreReport};
pub use scaler::Scaler;
pub use split::{chronological_split, split_rows, SplitIndices, TEST_HOURS};

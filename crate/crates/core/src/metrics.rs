//! Point-forecast error metrics on raw target units.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(CoreError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(CoreError::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok((sse(y, yhat) / y.len() as f64).sqrt())
}

/// Coefficient of determination, `1 - SSE / SST`. Undefined (an error) when
/// `y` is constant; negative when worse than predicting the mean.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(CoreError::InvalidArgument("r squared is undefined for a constant target".into()));
    }
    Ok(1.0 - sse(y, yhat) / sst)
}

fn sse(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum()
}

/// MAE, RMSE and R² of one forecast against its actuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the actuals are constant.
    pub r2: Option<f64>,
    pub n: usize,
}

impl Metrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Metrics { mae: mae(y, yhat)?, rmse: rmse(y, yhat)?, r2: r_squared(y, yhat).ok(), n: y.len() })
    }
}

//! Seasonal ARMA with exogenous regressors, estimated in two stages.
//!
//! Stage one regresses the target on `[1, X]` by ordinary least squares.
//! Stage two fits a multiplicative `(p,0,q)(P,0,Q)_s` ARMA model, with every
//! order at most one, to the regression residuals `u_t` by minimizing the
//! conditional sum of squared innovations:
//!
//! ```text
//! (1 - phi B)(1 - Phi B^s) u_t = (1 + theta B)(1 + Theta B^s) e_t
//! ```
//!
//! Innovations before the first usable residual are taken as zero. The
//! coefficients are searched with Nelder-Mead over `tanh`-transformed
//! variables, which keeps each of them strictly inside (-1, 1).

use std::ops::Range;

use lightcast_core::linalg::solve_ridge;
use lightcast_core::{TimeSeriesFrame, HOUR};
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::nelder_mead::{minimize, NelderMeadOptions};

/// `(p, d, q)(P, D, Q, s)`. Only orders 0 or 1 and no differencing are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarimaxOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub s: usize,
}

impl Default for SarimaxOrder {
    fn default() -> Self {
        SarimaxOrder { p: 1, d: 0, q: 1, seasonal_p: 1, seasonal_d: 0, seasonal_q: 1, s: 24 }
    }
}

impl SarimaxOrder {
    pub fn validate(&self) -> Result<()> {
        if self.d != 0 || self.seasonal_d != 0 {
            return Err(ModelError::InvalidConfig("differencing is not supported (d = D = 0)".into()));
        }
        if [self.p, self.q, self.seasonal_p, self.seasonal_q].iter().any(|o| *o > 1) {
            return Err(ModelError::InvalidConfig("ARMA orders above 1 are not supported".into()));
        }
        if self.s == 0 {
            return Err(ModelError::InvalidConfig("seasonal period must be at least 1".into()));
        }
        Ok(())
    }

    /// Residuals conditioned on before the first innovation is computed.
    fn start(&self) -> usize {
        self.p + self.seasonal_p * self.s
    }

    /// Length of the residual and innovation tails kept for forecasting.
    fn memory(&self) -> usize {
        self.s + 1
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SarimaxConfig {
    pub order: SarimaxOrder,
    pub optimizer: NelderMeadOptions,
}

/// ARMA coefficients of the residual process.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmaCoefficients {
    pub phi: f64,
    pub theta: f64,
    pub seasonal_phi: f64,
    pub seasonal_theta: f64,
}

impl ArmaCoefficients {
    /// Conditional expectation of `u_t` given past residuals and innovations.
    /// `u(lag)` and `e(lag)` return the value `lag` steps back.
    #[inline]
    fn predict(&self, s: usize, u: impl Fn(usize) -> f64, e: impl Fn(usize) -> f64) -> f64 {
        self.phi * u(1) + self.seasonal_phi * u(s) - self.phi * self.seasonal_phi * u(s + 1)
            + self.theta * e(1)
            + self.seasonal_theta * e(s)
            + self.theta * self.seasonal_theta * e(s + 1)
    }
}

/// Fitted SARIMAX model plus the filter state at the end of its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaxParams {
    pub order: SarimaxOrder,
    pub target: String,
    pub exog: Vec<String>,
    pub constant: f64,
    pub arma: ArmaCoefficients,
    pub beta: Vec<f64>,
    /// Innovation variance, CSS / effective sample size.
    pub sigma2: f64,
    pub css: f64,
    pub n_effective: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Timestamp of the last observation folded into the tails.
    pub last_timestamp: i64,
    /// Most recent regression residuals, oldest first.
    pub residual_tail: Vec<f64>,
    /// Most recent innovations, oldest first.
    pub innovation_tail: Vec<f64>,
}

fn exog_indices(frame: &TimeSeriesFrame, exog: &[String]) -> Result<Vec<usize>> {
    exog.iter().map(|r| frame.column_index(r).map_err(|_| ModelError::MissingRegressor(r.clone()))).collect()
}

/// Innovations of the residual series under `arma`, zero before `start`.
fn innovations(u: &[f64], arma: &ArmaCoefficients, s: usize, start: usize) -> Vec<f64> {
    let mut e = vec![0.0; u.len()];
    for t in start..u.len() {
        let back = |v: &[f64], lag: usize| if lag <= t { v[t - lag] } else { 0.0 };
        let pred = arma.predict(s, |l| back(u, l), |l| back(&e, l));
        e[t] = u[t] - pred;
    }
    e
}

fn css(u: &[f64], arma: &ArmaCoefficients, s: usize, start: usize) -> f64 {
    innovations(u, arma, s, start)[start..].iter().map(|v| v * v).sum()
}

fn unpack(order: &SarimaxOrder, z: &[f64]) -> ArmaCoefficients {
    let mut it = z.iter().map(|v| v.tanh());
    let mut take = |on: usize| if on == 1 { it.next().expect("one variable per active order") } else { 0.0 };
    ArmaCoefficients {
        phi: take(order.p),
        theta: take(order.q),
        seasonal_phi: take(order.seasonal_p),
        seasonal_theta: take(order.seasonal_q),
    }
}

/// Fits the regression and ARMA parts on the `train` rows.
pub fn fit_sarimax(
    config: &SarimaxConfig,
    frame: &TimeSeriesFrame,
    target: &str,
    exog: &[impl AsRef<str>],
    train: Range<usize>,
) -> Result<SarimaxParams> {
    let order = config.order;
    order.validate()?;
    let needed = 10 * order.s;
    if train.len() < needed || train.len() <= order.memory() {
        return Err(ModelError::InsufficientRows { needed, got: train.len() });
    }
    let window = frame.slice_rows(train.clone())?;
    window.ensure_hourly()?;
    let exog: Vec<String> = exog.iter().map(|e| e.as_ref().to_string()).collect();
    let y = window.column(target)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidConfig(format!("target {target:?} has non-finite training values")));
    }
    let idx = exog_indices(&window, &exog)?;
    let n = y.len();

    let x = DMatrix::from_fn(n, 1 + idx.len(), |i, j| if j == 0 { 1.0 } else { window.value(i, idx[j - 1]) });
    let ols = solve_ridge(&x, &y, &vec![0.0; 1 + idx.len()])?;
    if ols.jittered {
        warn!("SARIMAX regression for {target:?}: collinear exogenous regressors");
    }
    let constant = ols.coef[0];
    let beta = ols.coef[1..].to_vec();
    let u: Vec<f64> = (0..n).map(|i| y[i] - regression(constant, &beta, &idx, &window, i)).collect();

    let start = order.start();
    let dims = order.p + order.q + order.seasonal_p + order.seasonal_q;
    let objective = |z: &[f64]| css(&u, &unpack(&order, z), order.s, start);
    let best = minimize(objective, &vec![0.0; dims], &config.optimizer);
    if !best.converged {
        warn!("SARIMAX CSS for {target:?} did not converge in {} iterations", best.iterations);
    }
    let arma = unpack(&order, &best.x);
    let e = innovations(&u, &arma, order.s, start);
    let css_value: f64 = e[start..].iter().map(|v| v * v).sum();
    let n_effective = n - start;
    let m = order.memory();
    Ok(SarimaxParams {
        order,
        target: target.to_string(),
        exog,
        constant,
        arma,
        beta,
        sigma2: css_value / n_effective as f64,
        css: css_value,
        n_effective,
        converged: best.converged,
        iterations: best.iterations,
        last_timestamp: window.timestamps()[n - 1],
        residual_tail: u[n - m..].to_vec(),
        innovation_tail: e[n - m..].to_vec(),
    })
}

fn regression(c: f64, beta: &[f64], idx: &[usize], frame: &TimeSeriesFrame, row: usize) -> f64 {
    c + beta.iter().zip(idx).map(|(b, &j)| b * frame.value(row, j)).sum::<f64>()
}

fn push_tail(tail: &mut Vec<f64>, v: f64) {
    tail.remove(0);
    tail.push(v);
}

impl SarimaxParams {
    /// CSS objective of arbitrary ARMA coefficients on the residuals of the
    /// `rows` of `frame`, using this model's regression part.
    pub fn css_at(&self, frame: &TimeSeriesFrame, rows: Range<usize>, arma: &ArmaCoefficients) -> Result<f64> {
        let idx = exog_indices(frame, &self.exog)?;
        let t = frame.column_index(&self.target)?;
        let u: Vec<f64> =
            rows.map(|i| frame.value(i, t) - regression(self.constant, &self.beta, &idx, frame, i)).collect();
        Ok(css(&u, arma, self.order.s, self.order.start()))
    }

    /// Folds observed `rows` (which must directly follow `last_timestamp`)
    /// into the filter state. Returns the advanced model and the one-step
    /// predictions made for each row before it was observed.
    pub fn advance(&self, frame: &TimeSeriesFrame, rows: Range<usize>) -> Result<(SarimaxParams, Vec<f64>)> {
        let mut next = self.clone();
        if rows.is_empty() {
            return Ok((next, Vec::new()));
        }
        let expected = self.last_timestamp + HOUR;
        let first = frame.timestamps()[rows.start];
        if first != expected {
            return Err(ModelError::NotContiguous { expected, got: first });
        }
        let idx = exog_indices(frame, &self.exog)?;
        let t = frame.column_index(&self.target)?;
        let s = self.order.s;
        let mut preds = Vec::with_capacity(rows.len());
        for i in rows {
            let reg = regression(self.constant, &self.beta, &idx, frame, i);
            let m = next.residual_tail.len();
            let arma_part =
                self.arma.predict(s, |l| next.residual_tail[m - l], |l| next.innovation_tail[m - l]);
            let u = frame.value(i, t) - reg;
            preds.push(reg + arma_part);
            push_tail(&mut next.residual_tail, u);
            push_tail(&mut next.innovation_tail, u - arma_part);
            next.last_timestamp = frame.timestamps()[i];
        }
        Ok((next, preds))
    }

    /// One-step-ahead in-sample predictions over the training rows, ending at
    /// `last_timestamp`. The first conditioned rows predict themselves.
    pub fn fitted(&self, frame: &TimeSeriesFrame, train: Range<usize>) -> Result<Vec<f64>> {
        let idx = exog_indices(frame, &self.exog)?;
        let t = frame.column_index(&self.target)?;
        let u: Vec<f64> =
            train.clone().map(|i| frame.value(i, t) - regression(self.constant, &self.beta, &idx, frame, i)).collect();
        let e = innovations(&u, &self.arma, self.order.s, self.order.start());
        Ok(train.enumerate().map(|(k, i)| frame.value(i, t) - e[k]).collect())
    }
}

/// Recursive forecast for the horizon rows (exogenous columns only needed),
/// starting right after `last_timestamp`. Future innovations are zero.
pub fn forecast_sarimax(params: &SarimaxParams, horizon: &TimeSeriesFrame) -> Result<Vec<f64>> {
    if horizon.is_empty() {
        return Err(ModelError::InvalidConfig("horizon must be at least one step".into()));
    }
    let expected = params.last_timestamp + HOUR;
    if horizon.timestamps()[0] != expected {
        return Err(ModelError::NotContiguous { expected, got: horizon.timestamps()[0] });
    }
    let idx = exog_indices(horizon, &params.exog)?;
    let s = params.order.s;
    let mut u = params.residual_tail.clone();
    let mut e = params.innovation_tail.clone();
    let mut out = Vec::with_capacity(horizon.len());
    for i in 0..horizon.len() {
        for &j in &idx {
            if !horizon.value(i, j).is_finite() {
                return Err(ModelError::MissingRegressor(horizon.columns()[j].clone()));
            }
        }
        let m = u.len();
        let arma_part = params.arma.predict(s, |l| u[m - l], |l| e[m - l]);
        out.push(regression(params.constant, &params.beta, &idx, horizon, i) + arma_part);
        push_tail(&mut u, arma_part);
        push_tail(&mut e, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn hourly(cols: Vec<(&str, Vec<f64>)>) -> TimeSeriesFrame {
        let n = cols[0].1.len();
        TimeSeriesFrame::from_columns((0..n as i64).map(|i| i * HOUR).collect(), cols).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn no_exog() -> [&'static str; 0] {
        []
    }

    #[test]
    fn white_noise_fit_is_white() {
        // AR and MA factors may cancel, so check the implied process instead
        let f = hourly(vec![("y", noise(5000, 1))]);
        let p = fit_sarimax(&SarimaxConfig::default(), &f, "y", &no_exog(), 0..5000).unwrap();
        assert!((p.arma.phi + p.arma.theta).abs() < 0.1, "{:?}", p.arma);
        assert!((p.arma.seasonal_phi + p.arma.seasonal_theta).abs() < 0.1, "{:?}", p.arma);
        assert!((p.sigma2 - 1.0).abs() < 0.1, "{}", p.sigma2);
    }

    #[test]
    fn non_seasonal_white_noise() {
        let f = hourly(vec![("y", noise(3000, 11))]);
        let mut c = SarimaxConfig::default();
        c.order = SarimaxOrder { p: 1, q: 0, seasonal_p: 0, seasonal_q: 0, ..c.order };
        let p = fit_sarimax(&c, &f, "y", &no_exog(), 0..3000).unwrap();
        assert!(p.arma.phi.abs() < 0.1 && p.arma.theta == 0.0, "{:?}", p.arma);
        assert!(p.converged);
    }

    #[test]
    fn recovers_exog_beta() {
        let x = noise(4000, 12);
        let e = noise(4000, 13);
        let mut u = vec![0.0; 4000];
        for t in 1..4000 {
            u[t] = 0.5 * u[t - 1] + e[t];
        }
        let y: Vec<f64> = (0..4000).map(|t| 3.0 + 2.0 * x[t] + u[t]).collect();
        let f = hourly(vec![("y", y), ("x", x)]);
        let p = fit_sarimax(&SarimaxConfig::default(), &f, "y", &["x"], 0..4000).unwrap();
        assert!((p.beta[0] - 2.0).abs() < 0.1, "{:?}", p.beta);
        assert!((p.constant - 3.0).abs() < 0.3, "{}", p.constant);
    }

    #[test]
    fn recovers_seasonal_ar() {
        let e = noise(5000, 2);
        let mut y = vec![0.0; 5000];
        for t in 0..5000 {
            y[t] = e[t] + if t >= 24 { 0.7 * y[t - 24] } else { 0.0 };
        }
        let f = hourly(vec![("y", y)]);
        let p = fit_sarimax(&SarimaxConfig::default(), &f, "y", &no_exog(), 0..5000).unwrap();
        assert!((p.arma.seasonal_phi - 0.7).abs() < 0.15, "{:?}", p.arma);
    }

    #[test]
    fn optimizer_never_worsens_zero_start() {
        let f = hourly(vec![("y", noise(800, 3))]);
        let p = fit_sarimax(&SarimaxConfig::default(), &f, "y", &no_exog(), 0..800).unwrap();
        let at_zero = p.css_at(&f, 0..800, &ArmaCoefficients::default()).unwrap();
        assert!(p.css <= at_zero);
        assert_eq!(p.css_at(&f, 0..800, &p.arma).unwrap(), p.css);
    }

    #[test]
    fn refit_is_bit_identical() {
        let f = hourly(vec![("y", noise(600, 4)), ("x", noise(600, 5))]);
        let a = fit_sarimax(&SarimaxConfig::default(), &f, "y", &["x"], 0..600).unwrap();
        let b = fit_sarimax(&SarimaxConfig::default(), &f, "y", &["x"], 0..600).unwrap();
        assert_eq!(a, b);
    }

    fn bare(arma: ArmaCoefficients, constant: f64, beta: Vec<f64>, exog: Vec<String>) -> SarimaxParams {
        SarimaxParams {
            order: SarimaxOrder::default(),
            target: "y".into(),
            exog,
            constant,
            arma,
            beta,
            sigma2: 1.0,
            css: 0.0,
            n_effective: 0,
            converged: true,
            iterations: 0,
            last_timestamp: -HOUR,
            residual_tail: vec![0.0; 25],
            innovation_tail: vec![0.0; 25],
        }
    }

    #[test]
    fn zero_coefficients_give_regression() {
        let mut p = bare(ArmaCoefficients::default(), 1.5, vec![2.0], vec!["x".into()]);
        p.residual_tail = (0..25).map(|v| v as f64).collect();
        p.innovation_tail = (0..25).map(|v| -(v as f64)).collect();
        let h = hourly(vec![("x", vec![0.5, -1.0, 3.0])]);
        assert_eq!(forecast_sarimax(&p, &h).unwrap(), vec![2.5, -0.5, 7.5]);
        let bare_c = bare(ArmaCoefficients::default(), 4.0, vec![], vec![]);
        assert_eq!(forecast_sarimax(&bare_c, &h).unwrap(), vec![4.0; 3]);
    }

    #[test]
    fn ar_residual_decays_geometrically() {
        let mut p = bare(ArmaCoefficients { phi: 0.6, ..Default::default() }, 0.0, vec![], vec![]);
        *p.residual_tail.last_mut().unwrap() = 2.0;
        let h = hourly(vec![("x", vec![0.0; 20])]);
        let fc = forecast_sarimax(&p, &h).unwrap();
        for (k, v) in fc.iter().enumerate() {
            assert!((v - 0.6f64.powi(k as i32 + 1) * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_step_ma() {
        let mut p = bare(ArmaCoefficients { theta: 0.4, ..Default::default() }, 1.0, vec![3.0], vec!["x".into()]);
        *p.innovation_tail.last_mut().unwrap() = -2.0;
        let h = hourly(vec![("x", vec![0.5])]);
        let fc = forecast_sarimax(&p, &h).unwrap();
        assert!((fc[0] - (1.0 + 1.5 + 0.4 * -2.0)).abs() < 1e-15);
    }

    #[test]
    fn advance_then_forecast_matches_one_step() {
        let y = noise(1000, 7);
        let f = hourly(vec![("y", y)]);
        let p = fit_sarimax(&SarimaxConfig::default(), &f, "y", &no_exog(), 0..800).unwrap();
        let (q, one_step) = p.advance(&f, 800..900).unwrap();
        assert_eq!(q.last_timestamp, 899 * HOUR);
        let (_, next) = q.advance(&f, 900..901).unwrap();
        let fc = forecast_sarimax(&q, &f.slice_rows(900..901).unwrap()).unwrap();
        assert!((fc[0] - next[0]).abs() < 1e-12);
        assert_eq!(one_step.len(), 100);
        assert!(matches!(p.advance(&f, 801..802), Err(ModelError::NotContiguous { .. })));
    }

    #[test]
    fn rejects_bad_orders_and_short_series() {
        let f = hourly(vec![("y", noise(100, 8))]);
        assert!(matches!(
            fit_sarimax(&SarimaxConfig::default(), &f, "y", &no_exog(), 0..100),
            Err(ModelError::InsufficientRows { .. })
        ));
        let mut c = SarimaxConfig::default();
        c.order.d = 1;
        assert!(fit_sarimax(&c, &f, "y", &no_exog(), 0..100).is_err());
        let mut c = SarimaxConfig::default();
        c.order.p = 2;
        assert!(c.order.validate().is_err());
    }

    #[test]
    fn missing_exog_in_horizon() {
        let p = bare(ArmaCoefficients::default(), 0.0, vec![1.0], vec!["x".into()]);
        let h = hourly(vec![("z", vec![1.0])]);
        assert!(matches!(forecast_sarimax(&p, &h), Err(ModelError::MissingRegressor(_))));
    }
}

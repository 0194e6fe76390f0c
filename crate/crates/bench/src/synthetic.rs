//! Seeded Beijing-like hourly data: yearly, weekly and daily cycles, a
//! persistent pollution factor shared by the pollutant channels, weather
//! with its own seasonal cycle, and a handful of injected spikes.

use std::f64::consts::PI;

use lightcast_core::frame::parse_timestamp;
use lightcast_core::{TimeSeriesFrame, HOUR};
use lightcast_ingest::{POLLUTANTS, WEATHER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub hours: usize,
    pub start: String,
    /// AR(1) coefficient of the shared pollution factor.
    pub persistence: f64,
    /// Number of single-hour spikes injected for the anomaly filter.
    pub spikes: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { hours: 17544, start: "2024-01-01T00:00:00Z".into(), persistence: 0.95, spikes: 6 }
    }
}

struct Ar1 {
    phi: f64,
    state: f64,
    noise: Normal<f64>,
}

impl Ar1 {
    fn new(phi: f64, sd: f64) -> Self {
        Ar1 { phi, state: 0.0, noise: Normal::new(0.0, sd).expect("positive sd") }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.state = self.phi * self.state + self.noise.sample(rng);
        self.state
    }
}

pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<TimeSeriesFrame> {
    if config.hours < 2 {
        return Err(BenchError::Config("synthetic.hours must be at least 2".into()));
    }
    if !(config.persistence.abs() < 1.0) {
        return Err(BenchError::Config("synthetic.persistence must lie in (-1, 1)".into()));
    }
    let start = parse_timestamp(&config.start).map_err(|e| BenchError::Config(e.to_string()))?;
    let start = start - start.rem_euclid(HOUR);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut factor = Ar1::new(config.persistence, 1.0);
    let mut weather = Ar1::new(0.9, 0.8);

    let n = config.hours;
    let mut ts = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for h in 0..n {
        let t = start + h as i64 * HOUR;
        let abs_h = (t / HOUR) as f64;
        // winter maximum, afternoon maximum
        let yearly = (2.0 * PI * (abs_h / 8766.0 + 0.03)).cos();
        let weekly = (2.0 * PI * abs_h / 168.0).sin();
        let daily = (2.0 * PI * ((t.rem_euclid(86_400) / HOUR) as f64 - 9.0) / 24.0).sin();
        let f = factor.step(&mut rng);
        let w = weather.step(&mut rng);
        let z: [f64; 9] = std::array::from_fn(|_| unit.sample(&mut rng));

        let pm2_5 = (45.0 + 18.0 * yearly + 6.0 * weekly + 5.0 * daily + 6.0 * f + 0.0005 * h as f64 + 1.5 * z[0]).max(2.0);
        let pm10 = (1.35 * pm2_5 + 8.0 + 3.0 * z[1]).max(3.0);
        let co = (400.0 + 6.0 * pm2_5 + 25.0 * z[2]).max(50.0);
        let no = (2.0 + 0.1 * pm2_5 - 1.5 * daily + 0.8 * z[3]).max(0.1);
        let no2 = (15.0 + 0.45 * pm2_5 + 3.0 * z[4]).max(1.0);
        let so2 = (4.0 + 0.12 * pm2_5 + z[5]).max(0.5);
        let o3 = (60.0 - 25.0 * yearly + 20.0 * daily - 0.3 * pm2_5 + 5.0 * z[6]).max(1.0);
        let nh3 = (2.0 + 0.02 * pm2_5 + 0.5 * z[7]).max(0.1);
        let temp = 12.0 - 14.0 * yearly + 5.0 * daily + w;
        let dew_point = temp - 8.0 - 2.0 * daily + 1.2 * z[8];

        ts.push(t);
        rows.push(vec![pm2_5, pm10, co, no, no2, so2, o3, nh3, temp, dew_point]);
    }
    for _ in 0..config.spikes {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..POLLUTANTS.len());
        rows[i][j] *= 8.0;
    }
    let columns = POLLUTANTS.iter().chain(WEATHER.iter()).map(|c| c.to_string()).collect();
    TimeSeriesFrame::from_rows(ts, columns, rows).map_err(|e| BenchError::stage("synthetic", e))
}

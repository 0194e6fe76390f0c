//! Pollutant and weather history clients.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::DateTime;
use lightcast_core::frame::{format_timestamp, parse_timestamp};
use lightcast_core::{TimeSeriesFrame, HOUR};
use log::{debug, info};
use serde_json::Value;

use crate::error::{IngestError, Result};
use crate::limit::{RetryPolicy, TokenBucket, DEFAULT_REQUESTS_PER_MINUTE};
use crate::transport::{FixtureTransport, HttpTransport, Response, Transport};

pub const OPENWEATHER: &str = "openweather";
pub const OPENMETEO: &str = "openmeteo";
pub const OPENWEATHER_BASE_URL: &str = "https://api.openweathermap.org";
pub const OPENMETEO_BASE_URL: &str = "https://archive-api.open-meteo.com";
pub const POLLUTION_PATH: &str = "/data/2.5/air_pollution/history";
pub const ARCHIVE_PATH: &str = "/v1/archive";
pub const API_KEY_ENV: &str = "OPENWEATHER_API_KEY";
pub const FIXTURE_DIR_ENV: &str = "LIGHTCAST_FIXTURE_DIR";

/// Pollutant columns in the order they appear in fetched frames.
pub const POLLUTANTS: [&str; 8] = ["pm2_5", "pm10", "co", "no", "no2", "so2", "o3", "nh3"];
pub const WEATHER: [&str; 2] = ["temp", "dew_point"];

const CHUNK_SECONDS: i64 = 30 * 24 * HOUR;

/// Central Beijing.
pub const DEFAULT_LATITUDE: f64 = 39.9042;
pub const DEFAULT_LONGITUDE: f64 = 116.4074;

#[derive(Clone, PartialEq)]
pub struct ProviderQuery {
    pub latitude: f64,
    pub longitude: f64,
    /// Inclusive bounds, epoch seconds.
    pub start: i64,
    pub end: i64,
    pub api_key: Option<String>,
}

impl std::fmt::Debug for ProviderQuery {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderQuery")
            .field("latitude", &self.latitude)
            .field("longitude", &self.longitude)
            .field("start", &format_timestamp(self.start))
            .field("end", &format_timestamp(self.end))
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl ProviderQuery {
    pub fn new(latitude: f64, longitude: f64, start: i64, end: i64) -> Self {
        ProviderQuery { latitude, longitude, start, end, api_key: None }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    /// Reads the key from `OPENWEATHER_API_KEY` when it is set and non-empty.
    pub fn with_env_api_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.abs() <= 90.0) {
            return Err(IngestError::Precondition(format!("latitude {} outside [-90, 90]", self.latitude)));
        }
        if !(self.longitude.abs() <= 180.0) {
            return Err(IngestError::Precondition(format!("longitude {} outside [-180, 180]", self.longitude)));
        }
        if self.start >= self.end {
            return Err(IngestError::Precondition(format!(
                "start {} is not before end {}",
                format_timestamp(self.start),
                format_timestamp(self.end)
            )));
        }
        Ok(())
    }

    /// Consecutive windows of at most 30 days covering `[start, end]`.
    pub fn windows(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let mut s = self.start;
        loop {
            let e = (s + CHUNK_SECONDS).min(self.end);
            out.push((s, e));
            if e >= self.end {
                return out;
            }
            s = e + 1;
        }
    }
}

/// Fetches provider history through a [`Transport`], pacing requests per
/// provider and retrying transient failures.
pub struct Ingestor {
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    openweather_limit: TokenBucket,
    openmeteo_limit: TokenBucket,
    pub openweather_base: String,
    pub openmeteo_base: String,
}

impl Ingestor {
    pub fn new(transport: Arc<dyn Transport>, retry: RetryPolicy, requests_per_minute: u32) -> Self {
        Ingestor {
            transport,
            retry,
            openweather_limit: TokenBucket::per_minute(requests_per_minute),
            openmeteo_limit: TokenBucket::per_minute(requests_per_minute),
            openweather_base: OPENWEATHER_BASE_URL.to_string(),
            openmeteo_base: OPENMETEO_BASE_URL.to_string(),
        }
    }

    pub fn http() -> Result<Self> {
        Ok(Self::new(
            Arc::new(HttpTransport::new(Duration::from_secs(60))?),
            RetryPolicy::default(),
            DEFAULT_REQUESTS_PER_MINUTE,
        ))
    }

    pub fn fixtures(dir: impl AsRef<Path>) -> Self {
        Self::new(Arc::new(FixtureTransport::new(dir)), RetryPolicy::no_delay(1), DEFAULT_REQUESTS_PER_MINUTE)
    }

    /// Fixture replay when `LIGHTCAST_FIXTURE_DIR` is set, HTTP otherwise.
    pub fn from_env() -> Result<Self> {
        match std::env::var(FIXTURE_DIR_ENV) {
            Ok(dir) if !dir.is_empty() => Ok(Self::fixtures(dir)),
            _ => Self::http(),
        }
    }

    fn request(&self, provider: &'static str, path: &str, query: &[(&str, String)]) -> Result<String> {
        let (base, limiter) = if provider == OPENWEATHER {
            (&self.openweather_base, &self.openweather_limit)
        } else {
            (&self.openmeteo_base, &self.openmeteo_limit)
        };
        self.retry.run(|| {
            limiter.acquire();
            let Response { status, body } = self.transport.get(provider, base, path, query)?;
            match status {
                200..=299 => Ok(body),
                401 | 403 => Err(IngestError::Auth { provider, status }),
                _ => Err(IngestError::Http { provider, status }),
            }
        })
    }

    /// Hourly pollutant concentrations over `[q.start, q.end]` with the
    /// columns in [`POLLUTANTS`]. Provider units are kept.
    pub fn fetch_pollutants(&self, q: &ProviderQuery) -> Result<TimeSeriesFrame> {
        q.validate()?;
        let key = match (&q.api_key, self.transport.needs_credentials()) {
            (Some(k), _) => k.clone(),
            (None, false) => String::new(),
            (None, true) => return Err(IngestError::Precondition(format!("{API_KEY_ENV} is not set"))),
        };
        let mut rows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for (s, e) in q.windows() {
            debug!("{OPENWEATHER}: {} .. {}", format_timestamp(s), format_timestamp(e));
            let query = [
                ("lat", q.latitude.to_string()),
                ("lon", q.longitude.to_string()),
                ("start", s.to_string()),
                ("end", e.to_string()),
                ("appid", key.clone()),
            ];
            let body = self.request(OPENWEATHER, POLLUTION_PATH, &query)?;
            for (ts, vals) in parse_pollution(&body)? {
                if ts >= s && ts <= e {
                    rows.insert(ts, vals);
                }
            }
        }
        info!("{OPENWEATHER}: {} hourly records", rows.len());
        into_frame(OPENWEATHER, &POLLUTANTS, rows)
    }

    /// Hourly temperature and dew point (°C) over `[q.start, q.end]`.
    pub fn fetch_weather(&self, q: &ProviderQuery) -> Result<TimeSeriesFrame> {
        q.validate()?;
        let mut rows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for (s, e) in q.windows() {
            debug!("{OPENMETEO}: {} .. {}", format_timestamp(s), format_timestamp(e));
            let query = [
                ("latitude", q.latitude.to_string()),
                ("longitude", q.longitude.to_string()),
                ("start_date", date_of(s)),
                ("end_date", date_of(e)),
                ("hourly", "temperature_2m,dew_point_2m".to_string()),
                ("timezone", "UTC".to_string()),
            ];
            let body = self.request(OPENMETEO, ARCHIVE_PATH, &query)?;
            for (ts, vals) in parse_archive(&body)? {
                if ts >= s && ts <= e {
                    rows.insert(ts, vals);
                }
            }
        }
        info!("{OPENMETEO}: {} hourly records", rows.len());
        into_frame(OPENMETEO, &WEATHER, rows)
    }
}

fn date_of(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0).map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default()
}

fn into_frame(provider: &'static str, columns: &[&str], rows: BTreeMap<i64, Vec<f64>>) -> Result<TimeSeriesFrame> {
    if rows.is_empty() {
        return Err(IngestError::EmptyPayload { provider });
    }
    let (ts, values): (Vec<i64>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    Ok(TimeSeriesFrame::from_rows(ts, columns.iter().map(|c| c.to_string()).collect(), values)?)
}

fn malformed(provider: &'static str, message: impl Into<String>) -> IngestError {
    IngestError::MalformedPayload { provider, message: message.into() }
}

fn number_or_nan(v: Option<&Value>) -> std::result::Result<f64, ()> {
    match v {
        None | Some(Value::Null) => Ok(f64::NAN),
        Some(Value::Number(n)) => n.as_f64().ok_or(()),
        Some(_) => Err(()),
    }
}

/// Parses an air-pollution history payload into `(timestamp, POLLUTANTS)`.
pub fn parse_pollution(body: &str) -> Result<Vec<(i64, Vec<f64>)>> {
    let p = OPENWEATHER;
    let doc: Value = serde_json::from_str(body).map_err(|e| malformed(p, e.to_string()))?;
    let list = doc.get("list").and_then(Value::as_array).ok_or_else(|| malformed(p, "missing \"list\" array"))?;
    list.iter()
        .enumerate()
        .map(|(i, entry)| {
            let ts = entry.get("dt").and_then(Value::as_i64).ok_or_else(|| malformed(p, format!("list[{i}] has no integer \"dt\"")))?;
            let comp = entry
                .get("components")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed(p, format!("list[{i}] has no \"components\" object")))?;
            let vals = POLLUTANTS
                .iter()
                .map(|c| number_or_nan(comp.get(*c)).map_err(|_| malformed(p, format!("list[{i}].components.{c} is not a number"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok((ts, vals))
        })
        .collect()
}

/// Parses an archive payload into `(timestamp, [temp, dew_point])`, dropping
/// hours where both values are null.
pub fn parse_archive(body: &str) -> Result<Vec<(i64, Vec<f64>)>> {
    let p = OPENMETEO;
    let doc: Value = serde_json::from_str(body).map_err(|e| malformed(p, e.to_string()))?;
    let hourly = doc.get("hourly").and_then(Value::as_object).ok_or_else(|| malformed(p, "missing \"hourly\" object"))?;
    let array = |name: &str| {
        hourly.get(name).and_then(Value::as_array).ok_or_else(|| malformed(p, format!("missing hourly.{name} array")))
    };
    let time = array("time")?;
    let temp = array("temperature_2m")?;
    let dew = array("dew_point_2m")?;
    if temp.len() != time.len() || dew.len() != time.len() {
        return Err(malformed(
            p,
            format!("hourly arrays disagree: {} times, {} temperatures, {} dew points", time.len(), temp.len(), dew.len()),
        ));
    }
    let mut out = Vec::with_capacity(time.len());
    for i in 0..time.len() {
        let stamp = time[i].as_str().ok_or_else(|| malformed(p, format!("hourly.time[{i}] is not a string")))?;
        let ts = parse_timestamp(stamp).map_err(|e| malformed(p, e.to_string()))?;
        let t = number_or_nan(temp.get(i)).map_err(|_| malformed(p, format!("hourly.temperature_2m[{i}] is not a number")))?;
        let d = number_or_nan(dew.get(i)).map_err(|_| malformed(p, format!("hourly.dew_point_2m[{i}] is not a number")))?;
        if t.is_nan() && d.is_nan() {
            continue;
        }
        out.push((ts, vec![t, d]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_range_without_overlap() {
        let q = ProviderQuery::new(0.0, 0.0, 0, 100 * 24 * HOUR);
        let w = q.windows();
        assert_eq!(w.len(), 4);
        assert_eq!(w[0], (0, CHUNK_SECONDS));
        assert_eq!(w[1].0, CHUNK_SECONDS + 1);
        assert_eq!(w[3].1, q.end);
        let short = ProviderQuery::new(0.0, 0.0, 0, HOUR).windows();
        assert_eq!(short, vec![(0, HOUR)]);
    }

    #[test]
    fn validation() {
        assert!(ProviderQuery::new(91.0, 0.0, 0, 1).validate().is_err());
        assert!(ProviderQuery::new(0.0, -181.0, 0, 1).validate().is_err());
        assert!(ProviderQuery::new(0.0, 0.0, 5, 5).validate().is_err());
        assert!(ProviderQuery::new(DEFAULT_LATITUDE, DEFAULT_LONGITUDE, 0, 1).validate().is_ok());
    }

    #[test]
    fn key_is_redacted_in_debug() {
        let q = ProviderQuery::new(0.0, 0.0, 0, 1).with_api_key("s3cret");
        assert!(!format!("{q:?}").contains("s3cret"));
    }

    #[test]
    fn pollution_parsing() {
        let body = r#"{"coord":[1,2],"list":[{"dt":3600,"main":{"aqi":2},"components":{"co":201.9,"no":0,"no2":0.8,"o3":68.66,"so2":0.64,"pm2_5":0.5,"pm10":0.54,"nh3":0.12}}]}"#;
        let rows = parse_pollution(body).unwrap();
        assert_eq!(rows, vec![(3600, vec![0.5, 0.54, 201.9, 0.0, 0.8, 0.64, 68.66, 0.12])]);
        assert!(matches!(parse_pollution(r#"{"coord":[1,2]}"#), Err(IngestError::MalformedPayload { .. })));
        assert!(matches!(parse_pollution("not json"), Err(IngestError::MalformedPayload { .. })));
        let bad = r#"{"list":[{"dt":0,"components":{"pm2_5":"high"}}]}"#;
        assert!(matches!(parse_pollution(bad), Err(IngestError::MalformedPayload { .. })));
        let missing = parse_pollution(r#"{"list":[{"dt":0,"components":{"pm2_5":1}}]}"#).unwrap();
        assert!(missing[0].1[1].is_nan());
    }

    #[test]
    fn archive_parsing() {
        let body = r#"{"hourly":{"time":["2021-01-01T00:00","2021-01-01T01:00","2021-01-01T02:00"],"temperature_2m":[-3.1,null,-2.5],"dew_point_2m":[-12.0,null,null]}}"#;
        let rows = parse_archive(body).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], (1609459200, vec![-3.1, -12.0]));
        assert!(rows[1].1[1].is_nan());
        let short = r#"{"hourly":{"time":["2021-01-01T00:00"],"temperature_2m":[1,2],"dew_point_2m":[1]}}"#;
        assert!(matches!(parse_archive(short), Err(IngestError::MalformedPayload { .. })));
    }
}

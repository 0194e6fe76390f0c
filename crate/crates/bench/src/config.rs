//! Run configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use lightcast_ingest::client::{DEFAULT_LATITUDE, DEFAULT_LONGITUDE};
use lightcast_models::{ModelConfigs, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Live,
    Cache,
    Fixture,
    Synthetic,
}

impl std::str::FromStr for SourceKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(SourceKind::Live),
            "cache" => Ok(SourceKind::Cache),
            "fixture" => Ok(SourceKind::Fixture),
            "synthetic" => Ok(SourceKind::Synthetic),
            _ => Err(BenchError::Config(format!("unknown source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: SourceKind,
    /// CSV written by `fetch`, for the cache source.
    pub cache_path: Option<PathBuf>,
    /// Overrides `LIGHTCAST_FIXTURE_DIR` for the fixture source.
    pub fixture_dir: Option<PathBuf>,
    pub latitude: f64,
    pub longitude: f64,
    /// Inclusive UTC range for live and fixture sources.
    pub start: Option<String>,
    pub end: Option<String>,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: SourceKind::Synthetic,
            cache_path: None,
            fixture_dir: None,
            latitude: DEFAULT_LATITUDE,
            longitude: DEFAULT_LONGITUDE,
            start: None,
            end: None,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub seed: u64,
    pub anomaly_threshold: f64,
    pub targets: Vec<String>,
    /// Feature-selection candidates; empty means every non-target column.
    pub candidates: Vec<String>,
    /// Number of regressors kept per target.
    pub k: usize,
    pub mi_bins: Option<usize>,
    pub enabled_models: Vec<ModelKind>,
    /// Length of the held-out test window in hours.
    pub horizon: usize,
    /// Fit the additive model on train+val and report no validation metrics.
    pub fbp_val_free: bool,
    pub output_dir: PathBuf,
    pub models: ModelConfigs,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            seed: 42,
            anomaly_threshold: 5.0,
            targets: vec!["pm2_5".into(), "pm10".into()],
            candidates: Vec::new(),
            k: 5,
            mi_bins: None,
            enabled_models: ModelKind::ALL.to_vec(),
            horizon: 168,
            fbp_val_free: false,
            output_dir: PathBuf::from("lightcast-out"),
            models: ModelConfigs::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when the path ends in `.json`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.enabled_models.is_empty() {
            return bad("enabled_models is empty".into());
        }
        if self.targets.is_empty() {
            return bad("targets is empty".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.anomaly_threshold > 0.0) {
            return bad(format!("anomaly_threshold must be positive, got {}", self.anomaly_threshold));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1 hour".into());
        }
        match self.data.source {
            SourceKind::Cache if self.data.cache_path.is_none() => bad("cache source needs data.cache_path".into()),
            SourceKind::Live | SourceKind::Fixture if self.data.start.is_none() || self.data.end.is_none() => {
                bad("live and fixture sources need data.start and data.end".into())
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the configuration without its output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("configuration serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_toml() {
        let c = RunConfig::from_toml_str(
            r#"
            seed = 7
            enabled_models = ["fbp", "sarimax"]
            [data]
            source = "synthetic"
            [data.synthetic]
            hours = 2000
            [models.gbt]
            max_rounds = 10
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.enabled_models, vec![ModelKind::Fbp, ModelKind::Sarimax]);
        assert_eq!(c.data.synthetic.hours, 2000);
        assert_eq!(c.models.gbt.max_rounds, 10);
        assert_eq!(c.models.gbt.learning_rate, 0.05);
        assert!(RunConfig::from_toml_str("sed = 1").is_err());
    }

    #[test]
    fn json_alternative() {
        let c = RunConfig::from_json_str(r#"{"k": 3, "data": {"source": "cache", "cache_path": "x.csv"}}"#).unwrap();
        assert_eq!(c.k, 3);
        c.validate().unwrap();
    }

    #[test]
    fn digest_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.enabled_models.clear();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.data.source = SourceKind::Live;
        assert!(c.validate().is_err());
    }
}

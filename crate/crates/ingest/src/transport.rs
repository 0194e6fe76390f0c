//! How requests reach a provider: over HTTP, or replayed from fixture files.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{IngestError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    /// Performs `GET base_url + path` with the given query parameters.
    fn get(&self, provider: &'static str, base_url: &str, path: &str, query: &[(&str, String)]) -> Result<Response>;

    /// Whether requests through this transport need the provider's API key.
    fn needs_credentials(&self) -> bool {
        true
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("lightcast/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Transport { provider: "http", message: e.to_string() })?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, provider: &'static str, base_url: &str, path: &str, query: &[(&str, String)]) -> Result<Response> {
        let url = format!("{}{}", base_url.trim_end_matches('/'), path);
        let resp = self
            .client
            .get(&url)
            .query(query)
            .send()
            .map_err(|e| IngestError::Transport { provider, message: e.without_url().to_string() })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| IngestError::Transport { provider, message: e.without_url().to_string() })?;
        Ok(Response { status, body })
    }
}

/// Serves recorded payloads from a directory. The file for an endpoint is
/// named after the provider and the last path segment, e.g.
/// `openweather_history.json` or `openmeteo_archive.json`. Every request
/// to an endpoint gets the whole recording; clients keep only the hours
/// inside the requested window.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        FixtureTransport { dir: dir.as_ref().to_path_buf() }
    }

    pub fn file_for(&self, provider: &str, path: &str) -> PathBuf {
        let endpoint = path.trim_end_matches('/').rsplit('/').next().unwrap_or_default();
        self.dir.join(format!("{provider}_{endpoint}.json"))
    }
}

impl Transport for FixtureTransport {
    fn get(&self, provider: &'static str, _base_url: &str, path: &str, _query: &[(&str, String)]) -> Result<Response> {
        let file = self.file_for(provider, path);
        let body = std::fs::read_to_string(&file)
            .map_err(|source| IngestError::Fixture { path: file.display().to_string(), source })?;
        Ok(Response { status: 200, body })
    }

    fn needs_credentials(&self) -> bool {
        false
    }
}

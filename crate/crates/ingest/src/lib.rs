//! Historical air-quality and weather data for a coordinate, from
//! OpenWeather and Open-Meteo or from recorded fixtures.

pub mod client;
pub mod error;
pub mod limit;
pub mod merge;
pub mod transport;

pub use client::{Ingestor, ProviderQuery, POLLUTANTS, WEATHER};
pub use error::{IngestError, Result};
pub use merge::merge_sources;
pub use transport::{FixtureTransport, HttpTransport, Response, Transport};

use std::path::Path;

use lightcast_core::TimeSeriesFrame;

/// Reads a cached frame written by [`save_csv`].
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesFrame> {
    Ok(TimeSeriesFrame::read_csv(path)?)
}

pub fn save_csv(frame: &TimeSeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    Ok(frame.write_csv(path)?)
}

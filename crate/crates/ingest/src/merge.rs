use lightcast_core::{enforce_hourly_grid, GridReport, TimeSeriesFrame};

use crate::error::{IngestError, Result};

/// Inner-joins the two frames on timestamp, concatenates their columns and
/// puts the result on a gap-free hourly grid.
pub fn merge_sources(pollutants: &TimeSeriesFrame, weather: &TimeSeriesFrame) -> Result<(TimeSeriesFrame, GridReport)> {
    pollutants.ensure_hourly().or_else(|_| aligned(pollutants))?;
    weather.ensure_hourly().or_else(|_| aligned(weather))?;
    let mut ts = Vec::new();
    let mut rows = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (a, b) = (pollutants.timestamps(), weather.timestamps());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ts.push(a[i]);
                rows.push(pollutants.row(i).iter().chain(weather.row(j)).copied().collect());
                i += 1;
                j += 1;
            }
        }
    }
    if ts.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    let columns = pollutants.columns().iter().chain(weather.columns()).cloned().collect();
    let joined = TimeSeriesFrame::from_rows(ts, columns, rows)?;
    if joined.len() == 1 {
        return Ok((joined, GridReport::default()));
    }
    Ok(enforce_hourly_grid(&joined)?)
}

/// Gaps are fine here; timestamps only need to sit on whole hours.
fn aligned(frame: &TimeSeriesFrame) -> lightcast_core::Result<()> {
    match frame.timestamps().iter().find(|t| t.rem_euclid(lightcast_core::HOUR) != 0) {
        Some(t) => Err(lightcast_core::CoreError::Misaligned(*t)),
        None => Ok(()),
    }
}

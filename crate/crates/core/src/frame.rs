use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{CoreError, Result};

/// One hour in seconds.
pub const HOUR: i64 = 3600;

/// Hourly multi-variable series indexed by UTC timestamps (seconds since epoch).
///
/// Values are stored row-major: row `i` holds every column at `timestamps[i]`.
/// Construction checks that timestamps strictly increase and that column
/// names are unique; whether the index is a gap-free hourly grid is checked
/// separately with [`TimeSeriesFrame::ensure_hourly`], since raw provider
/// data may still have holes that [`crate::enforce_hourly_grid`] fills.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    timestamps: Vec<i64>,
    columns: Vec<String>,
    values: Vec<f64>,
}

impl TimeSeriesFrame {
    pub fn from_rows(timestamps: Vec<i64>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != timestamps.len() {
            return Err(CoreError::LengthMismatch { left: timestamps.len(), right: rows.len() });
        }
        let width = columns.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(CoreError::RaggedRow { row: i, got: row.len(), expected: width });
            }
            values.extend(row);
        }
        Self::from_raw(timestamps, columns, values)
    }

    /// Builds a frame from named columns of equal length.
    pub fn from_columns<S: Into<String>>(timestamps: Vec<i64>, columns: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let n = timestamps.len();
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n {
                return Err(CoreError::LengthMismatch { left: n, right: col.len() });
            }
            names.push(name.into());
            data.push(col);
        }
        let mut values = Vec::with_capacity(n * names.len());
        for i in 0..n {
            values.extend(data.iter().map(|c| c[i]));
        }
        Self::from_raw(timestamps, names, values)
    }

    fn from_raw(timestamps: Vec<i64>, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] == w[0] {
                return Err(CoreError::DuplicateTimestamp(w[0]));
            }
            if w[1] < w[0] {
                return Err(CoreError::Unordered { row: i + 1 });
            }
        }
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].contains(name) {
                return Err(CoreError::DuplicateColumn(name.clone()));
            }
        }
        debug_assert_eq!(values.len(), timestamps.len() * columns.len());
        Ok(Self { timestamps, columns, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CoreError::MissingColumn(name.to_string()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, v: f64) {
        let w = self.columns.len();
        self.values[row * w + col] = v;
    }

    /// Copy of column `idx`.
    pub fn column_at(&self, idx: usize) -> Vec<f64> {
        self.column_range_at(idx, 0..self.len())
    }

    pub fn column_range_at(&self, idx: usize, rows: Range<usize>) -> Vec<f64> {
        let w = self.columns.len();
        rows.map(|i| self.values[i * w + idx]).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column_at(self.column_index(name)?))
    }

    pub fn column_range(&self, name: &str, rows: Range<usize>) -> Result<Vec<f64>> {
        self.check_range(&rows)?;
        Ok(self.column_range_at(self.column_index(name)?, rows))
    }

    /// Replaces the contents of column `idx`.
    pub fn set_column_at(&mut self, idx: usize, col: &[f64]) -> Result<()> {
        if col.len() != self.len() {
            return Err(CoreError::LengthMismatch { left: self.len(), right: col.len() });
        }
        let w = self.columns.len();
        for (i, v) in col.iter().enumerate() {
            self.values[i * w + idx] = *v;
        }
        Ok(())
    }

    /// Rows `range` as a new frame.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self> {
        self.check_range(&range)?;
        let w = self.columns.len();
        Ok(Self {
            timestamps: self.timestamps[range.clone()].to_vec(),
            columns: self.columns.clone(),
            values: self.values[range.start * w..range.end * w].to_vec(),
        })
    }

    /// Subset of columns, in the requested order.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let idx: Vec<usize> = names.iter().map(|n| self.column_index(n.as_ref())).collect::<Result<_>>()?;
        let cols: Vec<(String, Vec<f64>)> =
            idx.iter().map(|&j| (self.columns[j].clone(), self.column_at(j))).collect();
        Self::from_columns(self.timestamps.clone(), cols)
    }

    /// Appends a column, failing if the name already exists.
    pub fn with_column(&self, name: &str, col: Vec<f64>) -> Result<Self> {
        if self.has_column(name) {
            return Err(CoreError::DuplicateColumn(name.to_string()));
        }
        let mut cols: Vec<(String, Vec<f64>)> =
            (0..self.n_cols()).map(|j| (self.columns[j].clone(), self.column_at(j))).collect();
        cols.push((name.to_string(), col));
        Self::from_columns(self.timestamps.clone(), cols)
    }

    pub fn is_hourly(&self) -> bool {
        self.timestamps.windows(2).all(|w| w[1] - w[0] == HOUR)
    }

    pub fn ensure_hourly(&self) -> Result<()> {
        match self.timestamps.windows(2).position(|w| w[1] - w[0] != HOUR) {
            None => Ok(()),
            Some(i) => Err(CoreError::NotHourly { row: i + 1 }),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Row index of an exact timestamp.
    pub fn row_of(&self, ts: i64) -> Option<usize> {
        self.timestamps.binary_search(&ts).ok()
    }

    fn check_range(&self, range: &Range<usize>) -> Result<()> {
        if range.start > range.end || range.end > self.len() {
            return Err(CoreError::InvalidArgument(format!(
                "row range {}..{} outside frame of {} rows",
                range.start,
                range.end,
                self.len()
            )));
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Parses the interchange CSV: `timestamp,<col>,...` with ISO-8601 UTC
    /// timestamps. Empty cells read as NaN.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("timestamp") {
            return Err(CoreError::InvalidArgument("first csv column must be \"timestamp\"".into()));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != columns.len() + 1 {
                return Err(CoreError::RaggedRow { row: i, got: rec.len().saturating_sub(1), expected: columns.len() });
            }
            timestamps.push(parse_timestamp(&rec[0])?);
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| CoreError::BadValue {
                        column: columns[j].clone(),
                        value: cell.to_string(),
                    })?
                };
                values.push(v);
            }
        }
        Self::from_raw(timestamps, columns, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = Vec::with_capacity(self.n_cols() + 1);
            rec.push(format_timestamp(self.timestamps[i]));
            rec.extend(self.row(i).iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.to_csv_writer(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
    }
}

/// `2021-01-01T00:00:00Z` style rendering of epoch seconds.
pub fn format_timestamp(ts: i64) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => ts.to_string(),
    }
}

/// Accepts RFC 3339 with an offset, or a naive `YYYY-MM-DDTHH:MM[:SS]`
/// which is taken as UTC.
pub fn parse_timestamp(s: &str) -> Result<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(CoreError::BadTimestamp(s.to_string()))
}

/// Hour of day (0..24) of a UTC timestamp.
pub fn hour_of_day(ts: i64) -> u32 {
    (ts.rem_euclid(86_400) / HOUR) as u32
}

/// Day of week with Monday = 0.
pub fn day_of_week(ts: i64) -> u32 {
    // 1970-01-01 was a Thursday
    ((ts.div_euclid(86_400) + 3).rem_euclid(7)) as u32
}

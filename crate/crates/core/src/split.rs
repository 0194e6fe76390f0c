use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::frame::TimeSeriesFrame;

/// Length of the held-out test window: the final week.
pub const TEST_HOURS: usize = 168;

/// Chronological train / validation / test partition of a frame's rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitIndices {
    pub fn total(&self) -> usize {
        self.test.end
    }

    /// Train and validation rows together.
    pub fn train_val(&self) -> Range<usize> {
        self.train.start..self.val.end
    }
}

/// Carves the last 168 rows off as the test window, then splits the rest
/// 8:1 into train and validation.
pub fn chronological_split(frame: &TimeSeriesFrame) -> Result<SplitIndices> {
    split_rows(frame.len(), TEST_HOURS)
}

/// Split arithmetic for `n` rows with a `test_len`-row tail.
pub fn split_rows(n: usize, test_len: usize) -> Result<SplitIndices> {
    // one train row and one val row at minimum, and round(rest * 8/9) < rest
    let needed = test_len + 9;
    if n < needed {
        return Err(CoreError::TooFewRows { needed, got: n });
    }
    let rest = n - test_len;
    let n_train = (rest as f64 * 8.0 / 9.0).round() as usize;
    Ok(SplitIndices { train: 0..n_train, val: n_train..rest, test: rest..n })
}

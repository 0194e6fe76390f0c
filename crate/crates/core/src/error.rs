use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("frame needs at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(i64),

    #[error("timestamps must be strictly increasing (at row {row})")]
    Unordered { row: usize },

    #[error("frame is not on a gap-free hourly grid (row {row})")]
    NotHourly { row: usize },

    #[error("timestamp {0} is not aligned to a whole hour")]
    Misaligned(i64),

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },

    #[error("column {0:?} has no finite values")]
    NoFiniteValues(String),

    #[error("column {0:?} is constant")]
    ConstantColumn(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("bad timestamp {0:?}")]
    BadTimestamp(String),

    #[error("bad value {value:?} in column {column:?}")]
    BadValue { column: String, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

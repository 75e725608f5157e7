use thiserror::Error;

/// Errors raised by the estimation, calibration and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains a non-finite value at series {series}, time {time}")]
    NonFinite { series: usize, time: usize },
    #[error("need at least {min} time points, got {n}")]
    TooShort { n: usize, min: usize },
    #[error("need at least one series")]
    NoSeries,
    #[error("ragged input: series {series} has {len} points, expected {expected}")]
    Ragged {
        series: usize,
        len: usize,
        expected: usize,
    },
    #[error("invalid interval triple s={s}, v={v}, e={e} for n={n}")]
    BadInterval { s: usize, v: usize, e: usize, n: usize },
    #[error("series index {index} out of range for p={p}")]
    BadSeries { index: usize, p: usize },
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("sparsity {t} outside [1, {p}]")]
    OutOfRange { t: usize, p: usize },
    #[error("sparsity {0} is not on the sparsity grid")]
    BadSparsity(usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("series {series} has zero estimated noise level")]
    DegenerateSeries { series: usize },
    #[error("interval set was generated for n={set_n}, data has n={data_n}")]
    MismatchedN { set_n: usize, data_n: usize },
    #[error("penalty table does not match the data: {0}")]
    TableMismatch(String),
    #[error("invalid simulation spec: {0}")]
    SpecInvalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

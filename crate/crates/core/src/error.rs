use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("prior masses must be non-increasing: p({index}) = {next} > p({prev_index}) = {prev}")]
    OrderViolation {
        prev_index: usize,
        index: usize,
        prev: f64,
        next: f64,
    },

    #[error("matrix horizon {horizon} leaves positive survival with no tail bound (box {box_index})")]
    IncompleteMatrix { horizon: usize, box_index: usize },

    #[error("water level scan exhausted the support at t = {t} (support {support})")]
    ScanExhausted { t: usize, support: usize },

    #[error("no live agent found the treasure within {cap} steps (trial {trial})")]
    Runaway { trial: u64, cap: u64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("prior parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),

    #[error("invalid block split: d = {d}, d1 = {d1}, d2 = {d2}")]
    InvalidSplit { d: usize, d1: usize, d2: usize },

    #[error("matrices do not commute (deviation {0:.3e})")]
    NotCommuting(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("not a group element: {0}")]
    NotGroupElement(String),

    #[error("period {period} is not a positive multiple of m0 = {m0}")]
    InvalidPeriod { period: usize, m0: usize },

    #[error("fields belong to different group specs")]
    SpecMismatch,

    #[error("range set: {0}")]
    InvalidRange(String),

    #[error("problem size {0} exceeds the dense-matrix guard")]
    SizeOverflow(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

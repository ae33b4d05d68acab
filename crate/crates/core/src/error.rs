use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by index construction and queries.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    EmptyInput,
    NonFinite,
    /// A query point or cube lies outside the unit cube where one is required.
    OutsideUnitCube,
    InvalidParameter(String),
    /// `k` outside `1..=n`.
    RankOutOfRange { k: usize, n: usize },
    OverlappingBalls(usize, usize),
    /// A precondition that routes the caller elsewhere, e.g. small `k` for the AVD.
    Precondition(String),
    /// The oracle refuses instances above its size cap.
    OracleCap { n: usize, cap: usize },
    /// An internal invariant failed; indicates a bug or a violated input contract.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptyInput => f.write_str("empty input"),
            Error::NonFinite => f.write_str("non-finite coordinate or radius"),
            Error::OutsideUnitCube => f.write_str("point outside the unit cube"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::RankOutOfRange { k, n } => write!(f, "k = {k} outside 1..={n}"),
            Error::OverlappingBalls(a, b) => write!(f, "balls {a} and {b} overlap"),
            Error::Precondition(msg) => write!(f, "precondition failed: {msg}"),
            Error::OracleCap { n, cap } => {
                write!(f, "oracle refuses n = {n} (cap {cap})")
            }
            Error::Internal(msg) => write!(f, "internal invariant breach: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::identifiability::IdentifiabilityReport;

/// Errors produced by the identification pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix dimension does not match what the operation requires.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An input value is NaN or infinite where finite data is required.
    NonFinite { context: &'static str },
    /// A column selection contains no windows.
    EmptySelection,
    /// An archive was constructed with no records.
    EmptyArchive,
    /// A selection refers to a record id that is not in the archive.
    UnknownRecord { record_id: String },
    /// Two records in one archive share an id.
    DuplicateRecordId { record_id: String },
    /// A record is too short for the requested windows.
    RecordTooShort {
        record_id: String,
        required: usize,
        actual: usize,
    },
    /// A selection window extends past the end of its record.
    WindowOutOfRange {
        record_id: String,
        offset: usize,
        count: usize,
        record_len: usize,
    },
    /// A rank configuration field is outside its allowed range.
    InvalidRankConfig { reason: &'static str },
    /// The block-row count `ell` does not exceed the required lower bound
    /// (the known lag, or the state dimension when no lag is given).
    BlockRowsTooSmall { ell: usize, bound: usize },
    /// The data failed the identifiability test; the report names the
    /// violated condition.
    NotIdentifiable { report: Box<IdentifiabilityReport> },
    /// A matrix that must have a given numerical rank falls short of it.
    RankDeficient {
        context: &'static str,
        rank: usize,
        required: usize,
        singular_values: Vec<f64>,
    },
    /// A matrix inversion was rejected because its condition number exceeds
    /// the configured limit.
    IllConditioned {
        context: &'static str,
        condition: f64,
        limit: f64,
    },
    /// An operation that simulates over an unbounded horizon was refused
    /// because the model is unstable.
    UnstableModel { spectral_radius: f64 },
    /// A generator spec failed validation.
    InvalidGeneratorSpec { reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                actual,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, got {actual}"
            ),
            Error::NonFinite { context } => {
                write!(f, "non-finite value in {context}")
            }
            Error::EmptySelection => write!(f, "column selection is empty"),
            Error::EmptyArchive => write!(f, "archive contains no records"),
            Error::UnknownRecord { record_id } => {
                write!(f, "record '{record_id}' not found in archive")
            }
            Error::DuplicateRecordId { record_id } => {
                write!(f, "duplicate record id '{record_id}'")
            }
            Error::RecordTooShort {
                record_id,
                required,
                actual,
            } => write!(
                f,
                "record '{record_id}' too short: need {required} samples, have {actual}"
            ),
            Error::WindowOutOfRange {
                record_id,
                offset,
                count,
                record_len,
            } => write!(
                f,
                "selection window (offset {offset}, count {count}) exceeds record '{record_id}' of length {record_len}"
            ),
            Error::InvalidRankConfig { reason } => {
                write!(f, "invalid rank configuration: {reason}")
            }
            Error::BlockRowsTooSmall { ell, bound } => write!(
                f,
                "block-row count ell={ell} must exceed {bound} (known lag, or state dimension)"
            ),
            Error::NotIdentifiable { report } => {
                write!(f, "data fails identifiability test: {}", report.failure_summary())
            }
            Error::RankDeficient {
                context,
                rank,
                required,
                ..
            } => write!(
                f,
                "{context} has numerical rank {rank}, need {required}"
            ),
            Error::IllConditioned {
                context,
                condition,
                limit,
            } => write!(
                f,
                "{context} is ill-conditioned: condition number {condition:.3e} exceeds {limit:.3e}"
            ),
            Error::UnstableModel { spectral_radius } => write!(
                f,
                "model is unstable (spectral radius {spectral_radius:.6}); use a bounded horizon"
            ),
            Error::InvalidGeneratorSpec { reason } => {
                write!(f, "invalid generator spec: {reason}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

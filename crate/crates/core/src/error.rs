use alloc::string::String;
use core::fmt;

use crate::dataset::Split;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Broad category of an [`Error`], used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data, shapes or parameters.
    Data,
    /// A computation produced NaN or infinity.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidSchema(String),
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    LabelOutOfRange {
        label: usize,
        levels: usize,
    },
    LengthMismatch {
        left: usize,
        right: usize,
    },
    Empty(&'static str),
    EmptySplit(Split),
    EmptyLevel {
        level: usize,
    },
    ZeroFrequency {
        level: usize,
    },
    ZeroNorm(&'static str),
    InvalidParameter(String),
    IncompatibleModel(String),
    NonFinite(&'static str),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSchema(msg) => write!(f, "invalid level schema: {msg}"),
            Error::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch ({context}): expected {expected}, found {found}"
            ),
            Error::LabelOutOfRange { label, levels } => {
                write!(f, "label {label} out of range for {levels} levels")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::Empty(what) => write!(f, "empty input: {what}"),
            Error::EmptySplit(split) => write!(f, "split '{split}' contains no records"),
            Error::EmptyLevel { level } => {
                write!(f, "level {level} has no training samples")
            }
            Error::ZeroFrequency { level } => {
                write!(f, "level {level} has zero frequency; class weight undefined")
            }
            Error::ZeroNorm(what) => write!(f, "zero-norm vector: {what}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::IncompatibleModel(msg) => write!(f, "incompatible model: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for Error {}

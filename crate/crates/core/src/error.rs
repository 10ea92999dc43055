use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the FFMA toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported field modulus {0}; expected one of 2, 3, 7")]
    UnsupportedModulus(u32),

    #[error("modulus mismatch: GF({left}) vs GF({right})")]
    ModulusMismatch { left: u8, right: u8 },

    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("element {value} out of range for GF({p})")]
    ElementOutOfRange { value: u32, p: u8 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid element pair: {0}")]
    InvalidPair(String),

    #[error("invalid code construction: {0}")]
    InvalidCode(String),

    #[error(
        "capacity exceeded: {requested} users requested, at most {bound} supported ({detail})"
    )]
    Capacity {
        requested: usize,
        bound: usize,
        detail: String,
    },

    #[error("bit value {0} is not binary")]
    NotABit(u8),

    #[error("index {index} out of range 1..={max} for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("enumeration too large: {what} needs {size} candidates (limit {limit})")]
    EnumerationTooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("no parity-check matrix attached to the code")]
    NoParityCheck,

    #[error("symbol {0} cannot be BPSK-mapped (only 1 and 2 are allowed)")]
    ZeroSymbol(u8),

    #[error("received value {0} is not in the CFSP alphabet")]
    OutOfAlphabet(i64),

    #[error("zero finite-field correlation: symbol is undecodable")]
    ZeroCorrelation,

    #[error("invalid power allocation: {0}")]
    InvalidPower(String),

    #[error("empty signal list")]
    EmptySignals,

    #[error("butterfly decode failed at destination {dest}: {count} consistent candidates")]
    Butterfly { dest: usize, count: usize },

    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnsupportedModulus(_) | Error::ModulusMismatch { .. } => "modulus",
            Error::DimensionMismatch { .. } => "dimension",
            Error::ElementOutOfRange { .. } | Error::NotABit(_) | Error::ZeroSymbol(_) => "value",
            Error::Parse { .. } => "parse",
            Error::InvalidPair(_) | Error::InvalidCode(_) => "code",
            Error::Capacity { .. } => "capacity",
            Error::IndexOutOfRange { .. } => "index",
            Error::EnumerationTooLarge { .. } => "enumeration",
            Error::NoParityCheck => "parity_check",
            Error::OutOfAlphabet(_) | Error::ZeroCorrelation => "detect",
            Error::InvalidPower(_) => "power",
            Error::EmptySignals => "signal",
            Error::Butterfly { .. } => "butterfly",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

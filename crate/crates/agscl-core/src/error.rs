use alloc::string::String;
use core::fmt;

/// Failure categories shared across the engine.
///
/// The CLI maps these onto process exit codes, so the split between
/// configuration, data, and numeric failures is part of the public contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Invalid configuration or a violated structural invariant.
    Config(String),
    /// Bad input data: labels out of range, empty datasets, negative statistics.
    Data(String),
    /// Malformed binary input; `offset` is the byte position of the defect.
    Format { offset: usize, message: String },
    /// Unknown task, node, or other missing key.
    Lookup(String),
    /// A non-finite value reached a numeric kernel; the step was aborted.
    Numeric(String),
    /// API misuse, e.g. querying a matrix entry that cannot exist yet.
    Usage(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::Lookup(m) => write!(f, "lookup error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// No proper extension exists (a recursion denominator vanished).
    Infeasible,
    /// The exact computation would exceed a configured size limit.
    CapExceeded { what: &'static str, needed: u64, cap: u64 },
    /// Input outside the domain of a formula or map.
    Domain(String),
    /// Malformed parameters or structures.
    Parameter(String),
    /// A color list is too short for the heat-bath chain to be ergodic.
    Ergodicity { vertex: usize },
    /// Bounded search ended without success.
    SearchExhausted(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Infeasible => write!(f, "infeasible pinning: no proper extension"),
            Error::CapExceeded { what, needed, cap } => {
                write!(f, "{what} needs {needed} which exceeds the cap {cap}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::Ergodicity { vertex } => write!(
                f,
                "vertex {vertex} has fewer than deg+2 colors; Glauber dynamics may be reducible"
            ),
            Error::SearchExhausted(msg) => write!(f, "search exhausted: {msg}"),
        }
    }
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

//! Distributed building blocks: ruling sets and clustering, helper-set
//! construction, global aggregation over the implicit ID tree, and token
//! dissemination.

pub mod aggregate;
pub mod disseminate;
pub mod helpers;
pub mod ruling;

use alloc::string::String;
use core::fmt;

use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimError {
    Engine(EngineError),
    /// A constructed structure failed its own post-run validation; signals a
    /// constant-calibration problem, not an engine fault.
    PropertyViolation(String),
}

impl fmt::Display for PrimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimError::Engine(e) => write!(f, "{e}"),
            PrimError::PropertyViolation(msg) => write!(f, "property violation: {msg}"),
        }
    }
}

impl From<EngineError> for PrimError {
    fn from(e: EngineError) -> Self {
        PrimError::Engine(e)
    }
}

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::allocator::ObjectId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistogramError {
    #[error("histogram underflow: bin {bin} is already empty")]
    Underflow { bin: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("zero-sized allocation for object {0}")]
    ZeroSize(ObjectId),
    #[error("object {0} is already live")]
    AlreadyLive(ObjectId),
    #[error("object {0} is not live")]
    NotLive(ObjectId),
    #[error("simulation arena exhausted ({limit} pages)")]
    ArenaExhausted { limit: u64 },
    #[error("object {0} has no slot in the popularity layout")]
    NotRanked(ObjectId),
    #[error("offset {offset} is outside object {id} ({size} bytes)")]
    OffsetOutOfRange { id: ObjectId, offset: u64, size: u64 },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary trace: {0}")]
    Binary(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("workload does not fit the arena: needs {needed} pages, arena has {arena}")]
    Infeasible { needed: u64, arena: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {key}: {msg}")]
    Value { section: String, key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Failures while replaying a trace.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// The trace itself is inconsistent (dead object, double free...).
    #[error("trace event {seq}: {source}")]
    Trace {
        seq: u64,
        #[source]
        source: AllocError,
    },
    /// An internal invariant was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl From<HistogramError> for SimError {
    fn from(e: HistogramError) -> Self {
        SimError::Invariant(e.to_string())
    }
}

/// Umbrella error for callers that drive whole experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// True for failures caused by the caller's input rather than by the
    /// simulator's own bookkeeping.
    pub fn is_bad_input(&self) -> bool {
        !matches!(self, Error::Sim(SimError::Invariant(_)))
    }
}

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced while loading, transforming or scoring corpora.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("terminology line {line}: {message}")]
    TerminologyFormat { line: usize, message: String },

    #[error("empty terminology")]
    EmptyTerminology,

    #[error("line count mismatch {left} vs {right}")]
    LineCountMismatch { left: usize, right: usize },

    #[error("line {line}: blank source line")]
    BlankSourceLine { line: usize },

    #[error("record {0}: {1}")]
    RecordFormat(usize, String),

    #[error("merge table: {0}")]
    MergeTableFormat(String),

    #[error("bpe: {0}")]
    Bpe(String),

    #[error("token {index}: {message}")]
    TagStructure { index: usize, message: String },

    #[error("reserved symbol collision: token {symbol:?} at position {index}")]
    ReservedCollision { symbol: String, index: usize },

    #[error("constraint spans overlap at token {0}")]
    OverlappingSpans(usize),

    #[error("constraint span {start}..{end} out of bounds for sentence of {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("no constraints to score")]
    NoConstraints,

    #[error("metric: {0}")]
    Metric(String),

    #[error("{0}")]
    InvalidArgument(String),
}

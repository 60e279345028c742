//! Terminology-aware corpus processing for machine translation pipelines.
//!
//! The crate covers the data-preparation and evaluation side of a
//! terminology-constrained MT system:
//!
//! - [`corpus`]: terminology dictionaries, aligned corpora, annotated-record I/O
//! - [`tokenize`]: rule-based tokenization and BPE subword segmentation
//! - [`matcher`]: multi-pattern token matching and target-variant resolution
//! - [`augment`]: TADA / MASK source annotation and sampling
//! - [`select`]: term-grounded corpus filtering and statistics
//! - [`metrics`]: BLEU, exact-match accuracy, window overlap, TER / 1-TERm
//!
//! All randomness is seeded and per-sentence, so pipelines produce identical
//! output for identical inputs regardless of worker count.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod matcher;
pub mod metrics;
pub mod select;
pub mod tokenize;

pub use augment::{annotate_corpus, AnnotateOptions, AnnotationScheme};
pub use corpus::{AnnotatedRecord, AnnotationMode, ConstraintSpan, SentencePair, TermEntry, Terminology};
pub use error::{Error, Result};
pub use matcher::{CasingPolicy, Matcher, RawSpan, ResolutionPolicy};
pub use metrics::EvalReport;
pub use tokenize::{MergeTable, TokenizerKind, TokenizerScheme};

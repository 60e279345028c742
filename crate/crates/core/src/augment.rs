//! Rendering of TADA and MASK annotated sources from constraint spans, the
//! inverse strip operation, the annotation-rate sampler, and the full
//! annotate pipeline.
//!
//! A constraint renders as `<S> src … <C> tgt … </C>`; MASK additionally
//! replaces each source-side token with the mask token, so a k-token span
//! yields a run of k masks. The four reserved symbols may never occur as
//! ordinary corpus tokens; a collision is an error rather than an escape.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedRecord, AnnotationMode, ConstraintSpan, SentencePair, Terminology};
use crate::error::{Error, Result};
use crate::matcher::{CasingPolicy, Matcher, ResolutionPolicy};

/// The tag inventory used for annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationScheme {
    pub open_src: String,
    pub open_tgt: String,
    pub close_tgt: String,
    pub mask: String,
}

impl Default for AnnotationScheme {
    fn default() -> Self {
        AnnotationScheme {
            open_src: "<S>".into(),
            open_tgt: "<C>".into(),
            close_tgt: "</C>".into(),
            mask: "MASK".into(),
        }
    }
}

impl AnnotationScheme {
    pub fn symbols(&self) -> [&str; 4] {
        [&self.open_src, &self.open_tgt, &self.close_tgt, &self.mask]
    }

    fn is_reserved(&self, token: &str) -> bool {
        self.symbols().contains(&token)
    }

    fn validate(&self) -> Result<()> {
        let symbols = self.symbols();
        for i in 0..symbols.len() {
            if symbols[i].is_empty() || symbols[i].contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "annotation symbol {:?} must be a single non-empty token",
                    symbols[i]
                )));
            }
            for j in i + 1..symbols.len() {
                if symbols[i] == symbols[j] {
                    return Err(Error::InvalidArgument(format!(
                        "annotation symbols must be pairwise distinct, {:?} repeats",
                        symbols[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_spans(tokens: &[String], constraints: &[ConstraintSpan]) -> Result<()> {
    let mut previous_end = 0usize;
    for span in constraints {
        if span.start >= span.end || span.end > tokens.len() {
            return Err(Error::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len: tokens.len(),
            });
        }
        if span.start < previous_end {
            return Err(Error::OverlappingSpans(span.start));
        }
        previous_end = span.end;
    }
    Ok(())
}

fn check_reserved(
    tokens: &[String],
    constraints: &[ConstraintSpan],
    scheme: &AnnotationScheme,
) -> Result<()> {
    for (index, token) in tokens.iter().enumerate() {
        if scheme.is_reserved(token) {
            return Err(Error::ReservedCollision { symbol: token.clone(), index });
        }
    }
    for span in constraints {
        for token in &span.chosen_target {
            if scheme.is_reserved(token) {
                return Err(Error::ReservedCollision { symbol: token.clone(), index: span.start });
            }
        }
    }
    Ok(())
}

/// Render an annotated source in the given mode. Constraints must be sorted,
/// disjoint and within bounds.
pub fn render(
    tokens: &[String],
    constraints: &[ConstraintSpan],
    mode: AnnotationMode,
    scheme: &AnnotationScheme,
) -> Result<Vec<String>> {
    if mode == AnnotationMode::Plain {
        return Ok(tokens.to_vec());
    }
    scheme.validate()?;
    validate_spans(tokens, constraints)?;
    check_reserved(tokens, constraints, scheme)?;
    let extra: usize = constraints.iter().map(|c| 3 + c.chosen_target.len()).sum();
    let mut out = Vec::with_capacity(tokens.len() + extra);
    let mut cursor = 0usize;
    for span in constraints {
        out.extend_from_slice(&tokens[cursor..span.start]);
        out.push(scheme.open_src.clone());
        match mode {
            AnnotationMode::Tada => out.extend_from_slice(&tokens[span.start..span.end]),
            AnnotationMode::Mask => {
                out.extend(std::iter::repeat_with(|| scheme.mask.clone()).take(span.end - span.start))
            }
            AnnotationMode::Plain => unreachable!(),
        }
        out.push(scheme.open_tgt.clone());
        out.extend_from_slice(&span.chosen_target);
        out.push(scheme.close_tgt.clone());
        cursor = span.end;
    }
    out.extend_from_slice(&tokens[cursor..]);
    Ok(out)
}

pub fn render_tada(
    tokens: &[String],
    constraints: &[ConstraintSpan],
    scheme: &AnnotationScheme,
) -> Result<Vec<String>> {
    render(tokens, constraints, AnnotationMode::Tada, scheme)
}

pub fn render_mask(
    tokens: &[String],
    constraints: &[ConstraintSpan],
    scheme: &AnnotationScheme,
) -> Result<Vec<String>> {
    render(tokens, constraints, AnnotationMode::Mask, scheme)
}

/// Source side of a recovered constraint: surface tokens (TADA) or the
/// length of the mask run (MASK).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveredSource {
    Tokens(Vec<String>),
    MaskRun(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredConstraint {
    /// Span within the stripped source token sequence.
    pub start: usize,
    pub end: usize,
    pub source: RecoveredSource,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrippedRecord {
    pub mode: AnnotationMode,
    /// The source with tags and targets removed; masked spans keep their
    /// mask tokens in place.
    pub source: Vec<String>,
    pub constraints: Vec<RecoveredConstraint>,
}

/// Remove annotation tags, recovering the (possibly masked) source and the
/// constraint list. Inverse of [`render`]: stripping a TADA rendering yields
/// the original source, and stripping a MASK rendering yields mask runs whose
/// lengths equal the original span lengths.
pub fn strip_annotation(annotated: &[String], scheme: &AnnotationScheme) -> Result<StrippedRecord> {
    #[derive(PartialEq)]
    enum State {
        Outside,
        InSource,
        InTarget,
    }

    scheme.validate()?;
    let mut state = State::Outside;
    let mut source: Vec<String> = Vec::new();
    let mut constraints: Vec<RecoveredConstraint> = Vec::new();
    let mut span_source: Vec<String> = Vec::new();
    let mut span_target: Vec<String> = Vec::new();
    let mut span_start = 0usize;

    for (index, token) in annotated.iter().enumerate() {
        if *token == scheme.open_src {
            if state != State::Outside {
                return Err(Error::TagStructure { index, message: format!("misnested {}", scheme.open_src) });
            }
            state = State::InSource;
            span_start = source.len();
            span_source.clear();
            span_target.clear();
        } else if *token == scheme.open_tgt {
            if state != State::InSource {
                return Err(Error::TagStructure { index, message: format!("misnested {}", scheme.open_tgt) });
            }
            if span_source.is_empty() {
                return Err(Error::TagStructure { index, message: "empty constraint source".into() });
            }
            state = State::InTarget;
        } else if *token == scheme.close_tgt {
            if state != State::InTarget {
                return Err(Error::TagStructure { index, message: format!("misnested {}", scheme.close_tgt) });
            }
            if span_target.is_empty() {
                return Err(Error::TagStructure { index, message: "empty constraint target".into() });
            }
            let masked = span_source.iter().all(|t| *t == scheme.mask);
            let recovered_source = if masked {
                RecoveredSource::MaskRun(span_source.len())
            } else {
                RecoveredSource::Tokens(span_source.clone())
            };
            source.append(&mut span_source);
            constraints.push(RecoveredConstraint {
                start: span_start,
                end: source.len(),
                source: recovered_source,
                target: std::mem::take(&mut span_target),
            });
            state = State::Outside;
        } else {
            match state {
                State::Outside => source.push(token.clone()),
                State::InSource => span_source.push(token.clone()),
                State::InTarget => span_target.push(token.clone()),
            }
        }
    }
    if state != State::Outside {
        return Err(Error::TagStructure {
            index: annotated.len(),
            message: "dangling annotation tag at end of sentence".into(),
        });
    }

    let mode = if constraints.is_empty() {
        AnnotationMode::Plain
    } else {
        let masked = constraints
            .iter()
            .filter(|c| matches!(c.source, RecoveredSource::MaskRun(_)))
            .count();
        if masked == constraints.len() {
            AnnotationMode::Mask
        } else if masked == 0 {
            AnnotationMode::Tada
        } else {
            return Err(Error::TagStructure {
                index: 0,
                message: "mixed masked and unmasked constraints".into(),
            });
        }
    };
    Ok(StrippedRecord { mode, source, constraints })
}

/// Uniformly sample which grounded sentences to annotate: a seeded draw of
/// min(|grounded|, floor(rate * total)) ids. Deterministic for a fixed seed.
pub fn sample_for_annotation(
    total: usize,
    grounded: &[usize],
    rate: f64,
    seed: u64,
) -> Result<HashSet<usize>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "annotation rate must be within [0, 1], got {rate}"
        )));
    }
    let budget = ((rate * total as f64) + 1e-9).floor() as usize;
    let k = budget.min(grounded.len());
    let mut ids: Vec<usize> = grounded.to_vec();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sampled, _) = ids.partial_shuffle(&mut rng, k);
    Ok(sampled.iter().copied().collect())
}

/// Options for [`annotate_corpus`].
#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub mode: AnnotationMode,
    pub policy: ResolutionPolicy,
    pub casing: CasingPolicy,
    /// Fraction of the corpus (not of the grounded subset) to annotate.
    pub rate: f64,
    pub seed: u64,
    pub scheme: AnnotationScheme,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        AnnotateOptions {
            mode: AnnotationMode::Tada,
            policy: ResolutionPolicy::TestRandom { seed: 42 },
            casing: CasingPolicy::CaseInsensitive,
            rate: 0.1,
            seed: 42,
            scheme: AnnotationScheme::default(),
        }
    }
}

/// The full annotation pipeline: match terms, resolve targets, sample the
/// annotation budget, and render. Sentences outside the sample, or without a
/// resolvable constraint, pass through as plain records. Output order equals
/// input order; sentences are processed in parallel.
pub fn annotate_corpus(
    pairs: Vec<SentencePair>,
    terminology: &Terminology,
    options: &AnnotateOptions,
) -> Result<Vec<AnnotatedRecord>> {
    if options.mode == AnnotationMode::Plain {
        return Err(Error::InvalidArgument("annotation mode must be tada or mask".into()));
    }
    let matcher = Matcher::build(terminology, options.casing)?;

    let resolved: Vec<Vec<ConstraintSpan>> = pairs
        .par_iter()
        .map(|pair| {
            let spans = matcher.find_spans(&pair.source);
            if spans.is_empty() {
                return Vec::new();
            }
            matcher.resolve_targets(&spans, pair.target.as_deref(), options.policy, pair.id)
        })
        .collect();

    // Grounded here means "annotatable": at least one constraint survived
    // resolution, so every sampled sentence really renders as non-plain.
    let grounded: Vec<usize> = pairs
        .iter()
        .zip(&resolved)
        .filter(|(_, c)| !c.is_empty())
        .map(|(p, _)| p.id)
        .collect();
    let sampled = sample_for_annotation(pairs.len(), &grounded, options.rate, options.seed)?;

    pairs
        .into_par_iter()
        .zip(resolved)
        .map(|(pair, constraints)| {
            if constraints.is_empty() || !sampled.contains(&pair.id) {
                return Ok(AnnotatedRecord::plain(pair));
            }
            let annotated = render(&pair.source, &constraints, options.mode, &options.scheme)?;
            Ok(AnnotatedRecord::annotated(pair, options.mode, constraints, annotated))
        })
        .collect()
}

//! Data model and I/O for terminology dictionaries, aligned parallel corpora
//! and annotated-record files.
//!
//! All text is normalized to Unicode NFC on load so that downstream matching
//! is byte-robust across sources. Files are UTF-8 with LF line endings; a
//! trailing newline never creates an empty trailing record.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

use crate::error::{Error, Result};

/// One source term with its target variants, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermEntry {
    /// Tokenized source term, at least one token.
    pub source: Vec<String>,
    /// Tokenized target variants; non-empty, deduplicated, file order.
    pub variants: Vec<Vec<String>>,
}

/// A terminology dictionary: source terms are unique across entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Terminology {
    pub entries: Vec<TermEntry>,
    pub language_pair: String,
}

impl Terminology {
    /// Number of distinct (source, target) pairs.
    pub fn unique_pair_count(&self) -> usize {
        self.entries.iter().map(|e| e.variants.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Re-split every term with `tokenizer`, applied to the space-joined
    /// token text. Used to bring a whitespace-split dictionary in line with
    /// the tokenization scheme of the corpus it will be matched against.
    pub fn retokenize<F>(&self, tokenizer: F) -> Terminology
    where
        F: Fn(&str) -> Vec<String>,
    {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let source = tokenizer(&e.source.join(" "));
                let mut variants = Vec::with_capacity(e.variants.len());
                for v in &e.variants {
                    let toks = tokenizer(&v.join(" "));
                    if !variants.contains(&toks) {
                        variants.push(toks);
                    }
                }
                TermEntry { source, variants }
            })
            .collect();
        Terminology {
            entries,
            language_pair: self.language_pair.clone(),
        }
    }
}

/// An aligned sentence pair; `target` is absent for monolingual or
/// source-only test data. `id` is the ordinal index within its corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: usize,
    pub source: Vec<String>,
    pub target: Option<Vec<String>>,
}

/// A resolved terminology match inside one source sentence: the token span
/// `start..end` equals `source_term` under the active casing policy, and
/// `chosen_target` is the variant selected by the resolution policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpan {
    pub start: usize,
    pub end: usize,
    pub source_term: Vec<String>,
    pub chosen_target: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationMode {
    Plain,
    Tada,
    Mask,
}

impl std::fmt::Display for AnnotationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnnotationMode::Plain => write!(f, "plain"),
            AnnotationMode::Tada => write!(f, "tada"),
            AnnotationMode::Mask => write!(f, "mask"),
        }
    }
}

/// A sentence pair with its rendered annotated source and the constraints
/// that produced it. Plain records share the annotated source with the
/// original source verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRecord {
    pub pair: SentencePair,
    pub mode: AnnotationMode,
    pub constraints: Vec<ConstraintSpan>,
    annotated: Option<Vec<String>>,
}

impl AnnotatedRecord {
    pub fn plain(pair: SentencePair) -> Self {
        AnnotatedRecord {
            pair,
            mode: AnnotationMode::Plain,
            constraints: Vec::new(),
            annotated: None,
        }
    }

    pub fn annotated(
        pair: SentencePair,
        mode: AnnotationMode,
        constraints: Vec<ConstraintSpan>,
        annotated_source: Vec<String>,
    ) -> Self {
        debug_assert!(mode != AnnotationMode::Plain);
        AnnotatedRecord {
            pair,
            mode,
            constraints,
            annotated: Some(annotated_source),
        }
    }

    /// The annotated source; for plain records this is the source itself.
    pub fn annotated_source(&self) -> &[String] {
        self.annotated.as_deref().unwrap_or(&self.pair.source)
    }
}

fn nfc_line(line: &str) -> String {
    match is_nfc_quick(line.chars()) {
        IsNormalized::Yes => line.to_string(),
        _ => line.nfc().collect(),
    }
}

fn read_lines<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(nfc_line(&line?));
    }
    Ok(lines)
}

/// Load a 2-column TSV terminology: `source<TAB>target`, UTF-8, no header.
/// Duplicate source lines merge into one entry's variant list; duplicate
/// (source, target) lines deduplicate. Entry and variant order follow file
/// order. Terms are whitespace-split into tokens.
pub fn load_terminology<R: BufRead>(reader: R, language_pair: &str) -> Result<Terminology> {
    let mut entries: Vec<TermEntry> = Vec::new();
    // source tokens (joined) -> index into entries
    let mut by_source: std::collections::HashMap<String, usize> = std::collections::HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = nfc_line(&line?);
        if line.trim().is_empty() {
            continue;
        }
        let mut sides = line.splitn(2, '\t');
        let src = sides.next().unwrap_or("").trim();
        let tgt = match sides.next() {
            Some(t) => t.trim(),
            None => {
                return Err(Error::TerminologyFormat {
                    line: lineno,
                    message: "missing tab separator".into(),
                })
            }
        };
        if tgt.contains('\t') {
            return Err(Error::TerminologyFormat {
                line: lineno,
                message: "more than one tab separator".into(),
            });
        }
        if src.is_empty() {
            return Err(Error::TerminologyFormat {
                line: lineno,
                message: "empty source side".into(),
            });
        }
        if tgt.is_empty() {
            return Err(Error::TerminologyFormat {
                line: lineno,
                message: "empty target side".into(),
            });
        }
        let src_tokens: Vec<String> = src.split_whitespace().map(str::to_string).collect();
        let tgt_tokens: Vec<String> = tgt.split_whitespace().map(str::to_string).collect();
        let key = src_tokens.join(" ");
        match by_source.get(&key) {
            Some(&i) => {
                if !entries[i].variants.contains(&tgt_tokens) {
                    entries[i].variants.push(tgt_tokens);
                }
            }
            None => {
                by_source.insert(key, entries.len());
                entries.push(TermEntry {
                    source: src_tokens,
                    variants: vec![tgt_tokens],
                });
            }
        }
    }

    if entries.is_empty() {
        return Err(Error::EmptyTerminology);
    }
    Ok(Terminology {
        entries,
        language_pair: language_pair.to_string(),
    })
}

/// Serialize back to TSV, one line per unique (source, target) pair.
/// Reloading the output yields an equal `Terminology`.
pub fn write_terminology<W: Write>(terminology: &Terminology, mut sink: W) -> Result<()> {
    for entry in &terminology.entries {
        for variant in &entry.variants {
            writeln!(sink, "{}\t{}", entry.source.join(" "), variant.join(" "))?;
        }
    }
    Ok(())
}

/// Load a line-aligned parallel corpus. Tokens are whitespace-split; apply a
/// tokenizer afterwards if the files are not pre-tokenized.
pub fn load_parallel<R1: BufRead, R2: BufRead>(src: R1, tgt: R2) -> Result<Vec<SentencePair>> {
    let src_lines = read_lines(src)?;
    let tgt_lines = read_lines(tgt)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LineCountMismatch {
            left: src_lines.len(),
            right: tgt_lines.len(),
        });
    }
    src_lines
        .into_iter()
        .zip(tgt_lines)
        .enumerate()
        .map(|(id, (s, t))| {
            if s.trim().is_empty() {
                return Err(Error::BlankSourceLine { line: id + 1 });
            }
            Ok(SentencePair {
                id,
                source: s.split_whitespace().map(str::to_string).collect(),
                target: Some(t.split_whitespace().map(str::to_string).collect()),
            })
        })
        .collect()
}

/// Load a source-only corpus (monolingual data or a test set without
/// references).
pub fn load_source<R: BufRead>(src: R) -> Result<Vec<SentencePair>> {
    let src_lines = read_lines(src)?;
    src_lines
        .into_iter()
        .enumerate()
        .map(|(id, s)| {
            if s.trim().is_empty() {
                return Err(Error::BlankSourceLine { line: id + 1 });
            }
            Ok(SentencePair {
                id,
                source: s.split_whitespace().map(str::to_string).collect(),
                target: None,
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct SidecarRecord {
    id: usize,
    mode: AnnotationMode,
    source: Vec<String>,
    #[serde(default)]
    target: Option<Vec<String>>,
    constraints: Vec<ConstraintSpan>,
}

/// Write records as two artifacts: the annotated source as plain text (one
/// sentence per line, tokens joined by single spaces) and a JSON-lines
/// sidecar carrying id, mode, the original pair and the constraint spans.
pub fn write_records<W1: Write, W2: Write>(
    records: &[AnnotatedRecord],
    mut text_sink: W1,
    mut sidecar_sink: W2,
) -> Result<()> {
    // borrowing mirror of SidecarRecord, so serialization does not clone
    #[derive(Serialize)]
    struct SidecarRecordRef<'a> {
        id: usize,
        mode: AnnotationMode,
        source: &'a [String],
        #[serde(skip_serializing_if = "Option::is_none")]
        target: Option<&'a [String]>,
        constraints: &'a [ConstraintSpan],
    }

    let mut line = Vec::with_capacity(256);
    for record in records {
        line.clear();
        for (i, token) in record.annotated_source().iter().enumerate() {
            if i > 0 {
                line.push(b' ');
            }
            line.extend_from_slice(token.as_bytes());
        }
        line.push(b'\n');
        text_sink.write_all(&line)?;

        let sidecar = SidecarRecordRef {
            id: record.pair.id,
            mode: record.mode,
            source: &record.pair.source,
            target: record.pair.target.as_deref(),
            constraints: &record.constraints,
        };
        line.clear();
        serde_json::to_writer(&mut line, &sidecar)
            .map_err(|e| Error::RecordFormat(record.pair.id, e.to_string()))?;
        line.push(b'\n');
        sidecar_sink.write_all(&line)?;
    }
    Ok(())
}

/// Read back the two artifacts produced by [`write_records`]. The line count
/// of both streams must agree; `read_records(write_records(r)) == r`.
pub fn read_records<R1: BufRead, R2: BufRead>(
    text_stream: R1,
    sidecar_stream: R2,
) -> Result<Vec<AnnotatedRecord>> {
    let text_lines = read_lines(text_stream)?;
    let mut records = Vec::with_capacity(text_lines.len());
    let mut sidecar_count = 0usize;
    for (idx, line) in sidecar_stream.lines().enumerate() {
        let line = line?;
        sidecar_count += 1;
        let sidecar: SidecarRecord = serde_json::from_str(&line)
            .map_err(|e| Error::RecordFormat(idx, e.to_string()))?;
        let annotated_tokens: Vec<String> = match text_lines.get(idx) {
            Some(text) => text.split_whitespace().map(str::to_string).collect(),
            None => {
                return Err(Error::LineCountMismatch {
                    left: text_lines.len(),
                    right: idx + 1,
                })
            }
        };
        let pair = SentencePair {
            id: sidecar.id,
            source: sidecar.source,
            target: sidecar.target,
        };
        let record = match sidecar.mode {
            AnnotationMode::Plain => AnnotatedRecord::plain(pair),
            mode => AnnotatedRecord::annotated(pair, mode, sidecar.constraints, annotated_tokens),
        };
        records.push(record);
    }
    if sidecar_count != text_lines.len() {
        return Err(Error::LineCountMismatch {
            left: text_lines.len(),
            right: sidecar_count,
        });
    }
    Ok(records)
}

/// Read constraint metadata only, keyed by line index; used by evaluation,
/// which does not need the annotated text.
pub fn read_sidecar_constraints<R: BufRead>(reader: R) -> Result<Vec<Vec<ConstraintSpan>>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let sidecar: SidecarRecord = serde_json::from_str(&line)
            .map_err(|e| Error::RecordFormat(idx, e.to_string()))?;
        out.push(sidecar.constraints);
    }
    Ok(out)
}

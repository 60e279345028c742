//! Deterministic tokenization and detokenization, plus BPE subword
//! segmentation in [`bpe`].
//!
//! The RULE scheme is a fixed approximation of a Moses-style tokenizer: it
//! splits sentence punctuation away from words while keeping hyphenated
//! compounds, decimal numbers and word-internal apostrophes intact. It is
//! idempotent on its own output, which is all the annotation pipeline needs;
//! byte compatibility with external tokenizers is a non-goal.

pub mod bpe;

pub use bpe::{bpe_learn, bpe_undo, read_merge_table, word_frequencies, write_merge_table, MergeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    /// Split on runs of whitespace only.
    Whitespace,
    /// Whitespace split plus punctuation separation (see module docs).
    Rule,
    /// Every non-space character becomes its own token.
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerScheme {
    pub kind: TokenizerKind,
    pub lowercase: bool,
}

impl TokenizerScheme {
    pub fn new(kind: TokenizerKind) -> Self {
        TokenizerScheme { kind, lowercase: false }
    }
}

impl Default for TokenizerScheme {
    fn default() -> Self {
        TokenizerScheme::new(TokenizerKind::Whitespace)
    }
}

/// Punctuation that is always split into its own token under RULE.
const ALWAYS_SPLIT: &[char] = &[
    '"', '(', ')', '[', ']', '{', '}', ':', ';', '!', '?', '«', '»', '“', '”', '‘', '…', '¿', '¡',
];

fn rule_split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut current = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let split = match c {
            // decimal and thousands separators stay inside numbers
            '.' | ',' => {
                !(prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit()))
            }
            // hyphenated compounds stay whole
            '-' => {
                !(prev.is_some_and(|p| p.is_alphanumeric()) && next.is_some_and(|n| n.is_alphanumeric()))
            }
            // word-internal apostrophes stay whole
            '\'' | '’' => {
                !(prev.is_some_and(|p| p.is_alphabetic()) && next.is_some_and(|n| n.is_alphabetic()))
            }
            c if ALWAYS_SPLIT.contains(&c) => true,
            _ => false,
        };
        if split {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
}

/// Tokenize `text` under `scheme`. Empty text yields an empty sequence; no
/// token ever contains whitespace.
pub fn tokenize(text: &str, scheme: &TokenizerScheme) -> Vec<String> {
    let mut tokens: Vec<String> = match scheme.kind {
        TokenizerKind::Whitespace => text.split_whitespace().map(str::to_string).collect(),
        TokenizerKind::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_string())
            .collect(),
        TokenizerKind::Rule => {
            let mut out = Vec::new();
            for chunk in text.split_whitespace() {
                rule_split_chunk(chunk, &mut out);
            }
            out
        }
    };
    if scheme.lowercase {
        for t in &mut tokens {
            *t = t.to_lowercase();
        }
    }
    tokens
}

fn is_closing(token: &str) -> bool {
    matches!(token, "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "}" | "»" | "”" | "…")
}

fn is_opening(token: &str) -> bool {
    matches!(token, "(" | "[" | "{" | "«" | "“" | "¿" | "¡")
}

/// Join tokens back into running text. RULE re-attaches punctuation: closers
/// bind left, openers bind right, and straight quotes alternate by parity.
pub fn detokenize(tokens: &[String], scheme: &TokenizerScheme) -> String {
    match scheme.kind {
        TokenizerKind::Whitespace => tokens.join(" "),
        TokenizerKind::Char => tokens.concat(),
        TokenizerKind::Rule => {
            let mut out = String::new();
            let mut suppress_space = true; // never a leading space
            let mut quote_open = std::collections::HashMap::new();
            for token in tokens {
                let quote = matches!(token.as_str(), "\"" | "'");
                if quote {
                    let open = quote_open.entry(token.clone()).or_insert(false);
                    *open = !*open;
                    if *open {
                        if !suppress_space {
                            out.push(' ');
                        }
                        out.push_str(token);
                        suppress_space = true;
                    } else {
                        out.push_str(token);
                        suppress_space = false;
                    }
                } else if is_closing(token) {
                    out.push_str(token);
                    suppress_space = false;
                } else if is_opening(token) {
                    if !suppress_space {
                        out.push(' ');
                    }
                    out.push_str(token);
                    suppress_space = true;
                } else {
                    if !suppress_space {
                        out.push(' ');
                    }
                    out.push_str(token);
                    suppress_space = false;
                }
            }
            out
        }
    }
}

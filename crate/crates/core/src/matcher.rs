//! Multi-pattern matching of terminology source terms over token sequences,
//! and resolution of target variants into [`ConstraintSpan`]s.
//!
//! The matcher is a token-level trie over interned pattern tokens: one hash
//! lookup per sentence token maps it to a pattern-token id (or none), after
//! which span discovery walks id transitions only. Matching is
//! leftmost-longest: at each position the longest pattern starting there
//! wins and the scan resumes past it, so spans are disjoint and sorted.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ConstraintSpan, TermEntry, Terminology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasingPolicy {
    Exact,
    CaseInsensitive,
}

impl CasingPolicy {
    pub fn fold(&self, token: &str) -> String {
        match self {
            CasingPolicy::Exact => token.to_string(),
            CasingPolicy::CaseInsensitive => token.to_lowercase(),
        }
    }

    pub fn tokens_equal(&self, a: &str, b: &str) -> bool {
        match self {
            CasingPolicy::Exact => a == b,
            CasingPolicy::CaseInsensitive => a.to_lowercase() == b.to_lowercase(),
        }
    }
}

/// How a matched term's target variant is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionPolicy {
    /// Pick the first variant (file order) that occurs in the reference;
    /// drop the span if none does. Requires a reference.
    TrainReferenceMatch,
    /// Pick uniformly at random with a generator derived from `seed` and the
    /// sentence id, so choices are reproducible and order-independent.
    TestRandom { seed: u64 },
}

/// An unresolved match: a token span plus the terminology entry it hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawSpan {
    pub start: usize,
    pub end: usize,
    pub entry: usize,
}

#[derive(Debug, Default)]
struct TrieNode {
    children: HashMap<u32, u32>,
    /// Entry index accepted at this node, if a pattern ends here.
    accept: Option<u32>,
}

/// Immutable token-level automaton over a terminology's source terms.
#[derive(Debug)]
pub struct Matcher {
    nodes: Vec<TrieNode>,
    token_ids: HashMap<String, u32>,
    entries: Vec<TermEntry>,
    casing: CasingPolicy,
    max_pattern_len: usize,
}

impl Matcher {
    pub fn build(terminology: &Terminology, casing: CasingPolicy) -> Result<Matcher> {
        if terminology.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot build a matcher from an empty terminology".into(),
            ));
        }
        let mut matcher = Matcher {
            nodes: vec![TrieNode::default()],
            token_ids: HashMap::new(),
            entries: terminology.entries.clone(),
            casing,
            max_pattern_len: 0,
        };
        for (entry_idx, entry) in terminology.entries.iter().enumerate() {
            let mut node = 0u32;
            for token in &entry.source {
                let folded = casing.fold(token);
                let next_token_id = matcher.token_ids.len() as u32;
                let token_id = *matcher.token_ids.entry(folded).or_insert(next_token_id);
                node = match matcher.nodes[node as usize].children.get(&token_id) {
                    Some(&child) => child,
                    None => {
                        let child = matcher.nodes.len() as u32;
                        matcher.nodes.push(TrieNode::default());
                        matcher.nodes[node as usize].children.insert(token_id, child);
                        child
                    }
                };
            }
            // sources that collide after case folding resolve to the first
            // entry in file order, like every other tie in this crate
            if matcher.nodes[node as usize].accept.is_none() {
                matcher.nodes[node as usize].accept = Some(entry_idx as u32);
            }
            matcher.max_pattern_len = matcher.max_pattern_len.max(entry.source.len());
        }
        Ok(matcher)
    }

    pub fn casing(&self) -> CasingPolicy {
        self.casing
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }

    /// Pattern-token id for one sentence token. Folding only allocates when
    /// the token can actually change under lowercasing.
    fn token_id(&self, token: &str) -> Option<u32> {
        match self.casing {
            CasingPolicy::Exact => self.token_ids.get(token).copied(),
            CasingPolicy::CaseInsensitive => {
                if token.is_ascii() && !token.bytes().any(|b| b.is_ascii_uppercase()) {
                    self.token_ids.get(token).copied()
                } else {
                    self.token_ids.get(&token.to_lowercase()).copied()
                }
            }
        }
    }

    /// Leftmost-longest non-overlapping cover of `tokens` by source terms.
    /// Every occurrence of every term is considered; the result is sorted by
    /// start and pairwise disjoint.
    pub fn find_spans(&self, tokens: &[String]) -> Vec<RawSpan> {
        let ids: Vec<Option<u32>> = tokens.iter().map(|t| self.token_id(t)).collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut node = 0u32;
            let mut best: Option<(usize, u32)> = None;
            let mut j = i;
            while j < tokens.len() {
                let Some(id) = ids[j] else { break };
                let Some(&child) = self.nodes[node as usize].children.get(&id) else { break };
                node = child;
                j += 1;
                if let Some(entry) = self.nodes[node as usize].accept {
                    best = Some((j, entry));
                }
            }
            match best {
                Some((end, entry)) => {
                    spans.push(RawSpan { start: i, end, entry: entry as usize });
                    i = end;
                }
                None => i += 1,
            }
        }
        spans
    }

    /// True if the tokens contain at least one source term.
    pub fn is_grounded(&self, tokens: &[String]) -> bool {
        let ids: Vec<Option<u32>> = tokens.iter().map(|t| self.token_id(t)).collect();
        for i in 0..tokens.len() {
            let mut node = 0u32;
            for id in &ids[i..] {
                let Some(id) = id else { break };
                let Some(&child) = self.nodes[node as usize].children.get(id) else { break };
                node = child;
                if self.nodes[node as usize].accept.is_some() {
                    return true;
                }
            }
        }
        false
    }

    /// Resolve raw spans into constraint spans under `policy`.
    ///
    /// Train-time resolution keeps the first variant found in the reference
    /// and drops spans whose entry has no variant there. Test-time resolution
    /// draws uniformly per span, in sentence order, from a generator seeded by
    /// (seed, sentence id).
    pub fn resolve_targets(
        &self,
        spans: &[RawSpan],
        reference: Option<&[String]>,
        policy: ResolutionPolicy,
        sentence_id: usize,
    ) -> Vec<ConstraintSpan> {
        let mut out = Vec::with_capacity(spans.len());
        match policy {
            ResolutionPolicy::TrainReferenceMatch => {
                let Some(reference) = reference else {
                    return out;
                };
                let folded_ref: Vec<String> =
                    reference.iter().map(|t| self.casing.fold(t)).collect();
                for span in spans {
                    let entry = &self.entries[span.entry];
                    let chosen = entry.variants.iter().find(|variant| {
                        let folded: Vec<String> =
                            variant.iter().map(|t| self.casing.fold(t)).collect();
                        contains_subsequence(&folded_ref, &folded)
                    });
                    if let Some(variant) = chosen {
                        out.push(ConstraintSpan {
                            start: span.start,
                            end: span.end,
                            source_term: entry.source.clone(),
                            chosen_target: variant.clone(),
                        });
                    }
                }
            }
            ResolutionPolicy::TestRandom { seed } => {
                let mut rng = sentence_rng(seed, sentence_id);
                for span in spans {
                    let entry = &self.entries[span.entry];
                    let variant = &entry.variants[rng.gen_range(0..entry.variants.len())];
                    out.push(ConstraintSpan {
                        start: span.start,
                        end: span.end,
                        source_term: entry.source.clone(),
                        chosen_target: variant.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Per-sentence generator: mixes the run seed with the sentence id so that
/// draws are independent of processing order and worker count.
fn sentence_rng(seed: u64, sentence_id: usize) -> ChaCha8Rng {
    let mut x = seed ^ (sentence_id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    ChaCha8Rng::seed_from_u64(x)
}

/// True if `needle` occurs as a contiguous subsequence of `haystack`.
pub fn contains_subsequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

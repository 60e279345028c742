//! Translation error rate with a greedy block-shift phase, plus the
//! terminology-weighted variant.
//!
//! The edit model is Snover-style: unit-cost word substitutions, insertions
//! and deletions, plus block shifts costing one edit each. A shift candidate
//! moves a contiguous hypothesis block (up to [`MAX_SHIFT_LEN`] tokens) to
//! the position where it matches the reference exactly; it is applied only
//! when it strictly reduces the remaining edit distance. Ties break by
//! largest gain, then leftmost block, then longest block, then smallest
//! destination.
//!
//! The terminology-weighted variant multiplies the cost of substitutions and
//! insertions that touch a reference token inside a term span by the term
//! weight, and normalizes by the weighted reference length; shift and
//! deletion costs stay at one since they touch no reference token.

use crate::error::{Error, Result};

/// Longest hypothesis block a shift may move.
pub const MAX_SHIFT_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum EditOp {
    /// Move `len` tokens starting at `start` so the block begins at `dest`
    /// (positions on the hypothesis as it stood when the shift was applied).
    Shift { start: usize, len: usize, dest: usize },
    /// Aligned equal tokens; consumes one hypothesis token.
    Match,
    /// Replace the next hypothesis token with this reference token.
    Substitute(String),
    /// Emit this reference token without consuming a hypothesis token.
    Insert(String),
    /// Drop the next hypothesis token.
    Delete,
}

/// A shift log plus a left-to-right token transcript; applying the script to
/// the hypothesis yields the reference, and `cost` is the sum of operation
/// costs under the active weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct EditScript {
    pub operations: Vec<EditOp>,
    pub cost: f64,
}

impl EditScript {
    /// Replay the script against `hypothesis`.
    pub fn apply(&self, hypothesis: &[String]) -> Vec<String> {
        let mut tokens: Vec<String> = hypothesis.to_vec();
        for op in &self.operations {
            if let EditOp::Shift { start, len, dest } = op {
                let block: Vec<String> = tokens.drain(*start..*start + *len).collect();
                for (offset, token) in block.into_iter().enumerate() {
                    tokens.insert(dest + offset, token);
                }
            }
        }
        let mut out = Vec::new();
        let mut cursor = 0usize;
        for op in &self.operations {
            match op {
                EditOp::Shift { .. } => {}
                EditOp::Match => {
                    out.push(tokens[cursor].clone());
                    cursor += 1;
                }
                EditOp::Substitute(token) => {
                    out.push(token.clone());
                    cursor += 1;
                }
                EditOp::Insert(token) => out.push(token.clone()),
                EditOp::Delete => cursor += 1,
            }
        }
        out
    }
}

/// Weighted edit distance (no shifts): substitution and insertion at
/// reference position j cost `weights[j]`, deletion costs 1.
fn weighted_edit_distance(hyp: &[String], reference: &[String], weights: &[f64]) -> f64 {
    let n = hyp.len();
    let m = reference.len();
    let mut prev: Vec<f64> = vec![0.0; m + 1];
    for j in 1..=m {
        prev[j] = prev[j - 1] + weights[j - 1];
    }
    let mut curr = vec![0.0f64; m + 1];
    for i in 1..=n {
        curr[0] = i as f64;
        for j in 1..=m {
            let sub_cost = if hyp[i - 1] == reference[j - 1] { 0.0 } else { weights[j - 1] };
            let best = (prev[j] + 1.0)
                .min(curr[j - 1] + weights[j - 1])
                .min(prev[j - 1] + sub_cost);
            curr[j] = best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Full DP with traceback, emitting the token transcript.
fn edit_transcript(hyp: &[String], reference: &[String], weights: &[f64]) -> (Vec<EditOp>, f64) {
    let n = hyp.len();
    let m = reference.len();
    let mut dist = vec![vec![0.0f64; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate().skip(1) {
        row[0] = i as f64;
    }
    for j in 1..=m {
        dist[0][j] = dist[0][j - 1] + weights[j - 1];
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = if hyp[i - 1] == reference[j - 1] { 0.0 } else { weights[j - 1] };
            dist[i][j] = (dist[i - 1][j] + 1.0)
                .min(dist[i][j - 1] + weights[j - 1])
                .min(dist[i - 1][j - 1] + sub_cost);
        }
    }
    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = if hyp[i - 1] == reference[j - 1] { 0.0 } else { weights[j - 1] };
            if (dist[i][j] - (dist[i - 1][j - 1] + sub_cost)).abs() < 1e-9 {
                ops.push(if sub_cost == 0.0 {
                    EditOp::Match
                } else {
                    EditOp::Substitute(reference[j - 1].clone())
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && (dist[i][j] - (dist[i - 1][j] + 1.0)).abs() < 1e-9 {
            ops.push(EditOp::Delete);
            i -= 1;
            continue;
        }
        ops.push(EditOp::Insert(reference[j - 1].clone()));
        j -= 1;
    }
    ops.reverse();
    (ops, dist[n][m])
}

struct ShiftChoice {
    start: usize,
    len: usize,
    dest: usize,
    shifted: Vec<String>,
    new_distance: f64,
}

/// Best strictly-improving shift, or none. Candidates move a block to where
/// it matches the reference; destination index is clamped to the shortened
/// hypothesis.
fn best_shift(hyp: &[String], reference: &[String], weights: &[f64], current: f64) -> Option<ShiftChoice> {
    let n = hyp.len();
    let m = reference.len();
    let mut best: Option<(f64, ShiftChoice)> = None;
    for start in 0..n {
        let max_len = MAX_SHIFT_LEN.min(n - start);
        for len in 1..=max_len {
            let block = &hyp[start..start + len];
            if len > m {
                break;
            }
            for ref_pos in 0..=(m - len) {
                if &reference[ref_pos..ref_pos + len] != block {
                    continue;
                }
                let dest = ref_pos.min(n - len);
                if dest == start {
                    continue;
                }
                let mut shifted: Vec<String> = Vec::with_capacity(n);
                shifted.extend_from_slice(&hyp[..start]);
                shifted.extend_from_slice(&hyp[start + len..]);
                for (offset, token) in block.iter().enumerate() {
                    shifted.insert(dest + offset, token.clone());
                }
                let new_distance = weighted_edit_distance(&shifted, reference, weights);
                let gain = current - new_distance;
                if gain <= 1e-9 {
                    continue;
                }
                let candidate_key = (gain, start, len, dest);
                let replace = match &best {
                    None => true,
                    Some((g, c)) => {
                        let incumbent = (*g, c.start, c.len, c.dest);
                        gain > incumbent.0 + 1e-9
                            || ((gain - incumbent.0).abs() <= 1e-9
                                && (candidate_key.1, std::cmp::Reverse(candidate_key.2), candidate_key.3)
                                    < (incumbent.1, std::cmp::Reverse(incumbent.2), incumbent.3))
                    }
                };
                if replace {
                    best = Some((gain, ShiftChoice { start, len, dest, shifted, new_distance }));
                }
            }
        }
    }
    best.map(|(_, choice)| choice)
}

/// Greedy shift phase followed by the weighted DP; returns the script and
/// the weighted reference length (the TER normalizer).
fn ter_script_weighted(
    hyp: &[String],
    reference: &[String],
    weights: &[f64],
) -> Result<(EditScript, f64)> {
    if reference.is_empty() {
        return Err(Error::Metric("empty reference".into()));
    }
    debug_assert_eq!(weights.len(), reference.len());
    let mut current_hyp: Vec<String> = hyp.to_vec();
    let mut operations: Vec<EditOp> = Vec::new();
    let mut shift_cost = 0.0f64;
    let mut distance = weighted_edit_distance(&current_hyp, reference, weights);
    while distance > 0.0 {
        let Some(choice) = best_shift(&current_hyp, reference, weights, distance) else {
            break;
        };
        operations.push(EditOp::Shift { start: choice.start, len: choice.len, dest: choice.dest });
        shift_cost += 1.0;
        current_hyp = choice.shifted;
        distance = choice.new_distance;
    }
    let (token_ops, edit_cost) = edit_transcript(&current_hyp, reference, weights);
    operations.extend(token_ops);
    let script = EditScript { operations, cost: shift_cost + edit_cost };
    let normalizer: f64 = weights.iter().sum();
    Ok((script, normalizer))
}

/// Standard TER: (edits + shifts) / |reference|. May exceed 1.
pub fn ter(hyp: &[String], reference: &[String]) -> Result<f64> {
    let weights = vec![1.0; reference.len()];
    if reference.is_empty() {
        return Err(Error::Metric("empty reference".into()));
    }
    let (script, normalizer) = ter_script_weighted(hyp, reference, &weights)?;
    Ok(script.cost / normalizer)
}

/// TER without the shift phase: plain token edit distance over |reference|.
pub fn ter_no_shift(hyp: &[String], reference: &[String]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Metric("empty reference".into()));
    }
    let weights = vec![1.0; reference.len()];
    Ok(weighted_edit_distance(hyp, reference, &weights) / reference.len() as f64)
}

/// The full edit script for inspection and invariant checks.
pub fn ter_script(hyp: &[String], reference: &[String]) -> Result<EditScript> {
    let weights = vec![1.0; reference.len()];
    if reference.is_empty() {
        return Err(Error::Metric("empty reference".into()));
    }
    Ok(ter_script_weighted(hyp, reference, &weights)?.0)
}

/// Absolute weighted cost and normalizer for one sentence; used for corpus
/// aggregation where costs and lengths are summed before dividing.
pub fn term_ter_components(
    hyp: &[String],
    reference: &[String],
    term_spans: &[(usize, usize)],
    term_weight: f64,
) -> Result<(f64, f64)> {
    if term_weight < 1.0 {
        return Err(Error::Metric(format!("term weight must be >= 1, got {term_weight}")));
    }
    for &(start, end) in term_spans {
        if start >= end || end > reference.len() {
            return Err(Error::Metric(format!(
                "term span {start}..{end} out of bounds for reference of {} tokens",
                reference.len()
            )));
        }
    }
    let mut weights = vec![1.0f64; reference.len()];
    for &(start, end) in term_spans {
        for w in &mut weights[start..end] {
            *w = term_weight;
        }
    }
    let (script, normalizer) = ter_script_weighted(hyp, reference, &weights)?;
    Ok((script.cost, normalizer))
}

/// Terminology-biased TER for one sentence.
pub fn term_ter(
    hyp: &[String],
    reference: &[String],
    term_spans: &[(usize, usize)],
    term_weight: f64,
) -> Result<f64> {
    let (cost, normalizer) = term_ter_components(hyp, reference, term_spans, term_weight)?;
    Ok(cost / normalizer)
}

/// The reported form: 1 - TERm, clamped into [0, 1].
pub fn one_minus_term(
    hyp: &[String],
    reference: &[String],
    term_spans: &[(usize, usize)],
    term_weight: f64,
) -> Result<f64> {
    Ok((1.0 - term_ter(hyp, reference, term_spans, term_weight)?).clamp(0.0, 1.0))
}

//! Corpus-level BLEU: modified n-gram precisions for n = 1..4 with add-one
//! smoothing for the higher orders when their match count is zero, times the
//! brevity penalty. A zero unigram precision is not smoothed and yields 0.

use std::collections::HashMap;

use crate::error::{Error, Result};

const MAX_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU over aligned hypothesis/reference lists, as a fraction in
/// [0, 1].
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Metric(format!(
            "hypothesis/reference length mismatch {} vs {}",
            hypotheses.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(|r| r.is_empty()) {
        return Err(Error::Metric(format!("empty reference at line {}", i + 1)));
    }

    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for order in 1..=MAX_ORDER {
            if hyp.len() < order {
                continue;
            }
            totals[order - 1] += (hyp.len() - order + 1) as u64;
            let ref_counts = ngram_counts(reference, order);
            for (gram, count) in ngram_counts(hyp, order) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[order - 1] += count.min(clip);
            }
        }
    }

    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_precision_sum = 0.0f64;
    for order in 1..=MAX_ORDER {
        let m = matches[order - 1];
        let t = totals[order - 1];
        let p = if order >= 2 && m == 0 {
            (m + 1) as f64 / (t + 1) as f64
        } else {
            m as f64 / t as f64
        };
        log_precision_sum += p.ln();
    }
    let brevity = (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp();
    Ok(brevity * (log_precision_sum / MAX_ORDER as f64).exp())
}

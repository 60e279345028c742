//! Term-grounded corpus filtering, per-corpus statistics and up-sampling.

use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::error::{Error, Result};
use crate::matcher::Matcher;

/// One statistics row: how many sentences a corpus has and how many contain
/// at least one terminology source term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub name: String,
    pub sentences: usize,
    pub term_grounded: usize,
}

/// Per-corpus rows plus a totals row; totals are always the column sums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
}

impl CorpusStats {
    pub fn total_sentences(&self) -> usize {
        self.rows.iter().map(|r| r.sentences).sum()
    }

    pub fn total_grounded(&self) -> usize {
        self.rows.iter().map(|r| r.term_grounded).sum()
    }

    /// Aligned plain-text table with the same column layout as the
    /// structured form.
    pub fn render_table(&self) -> String {
        let headers = ["Data type", "#sentences", "#term-grounded sentences"];
        let mut cells: Vec<[String; 3]> = self
            .rows
            .iter()
            .map(|r| [r.name.clone(), r.sentences.to_string(), r.term_grounded.to_string()])
            .collect();
        cells.push([
            "#Total".to_string(),
            self.total_sentences().to_string(),
            self.total_grounded().to_string(),
        ]);
        let mut widths = [headers[0].len(), headers[1].len(), headers[2].len()];
        for row in &cells {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let fmt_row = |cols: [&str; 3], widths: &[usize; 3]| {
            format!(
                "{:<w0$}  {:>w1$}  {:>w2$}\n",
                cols[0],
                cols[1],
                cols[2],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            )
        };
        out.push_str(&fmt_row(headers, &widths));
        for row in &cells {
            out.push_str(&fmt_row([&row[0], &row[1], &row[2]], &widths));
        }
        out
    }
}

/// Keep exactly the pairs whose source contains at least one term; returns
/// the grounded subset (original ids retained) and its statistics row.
pub fn term_grounded_filter(
    pairs: &[SentencePair],
    matcher: &Matcher,
    name: &str,
) -> (Vec<SentencePair>, StatsRow) {
    let grounded: Vec<SentencePair> = pairs
        .iter()
        .filter(|p| matcher.is_grounded(&p.source))
        .cloned()
        .collect();
    let row = StatsRow {
        name: name.to_string(),
        sentences: pairs.len(),
        term_grounded: grounded.len(),
    };
    (grounded, row)
}

/// Statistics over a list of named corpora, in input order.
pub fn corpus_stats(corpora: &[(String, Vec<SentencePair>)], matcher: &Matcher) -> CorpusStats {
    let rows = corpora
        .iter()
        .map(|(name, pairs)| StatsRow {
            name: name.clone(),
            sentences: pairs.len(),
            term_grounded: pairs.iter().filter(|p| matcher.is_grounded(&p.source)).count(),
        })
        .collect();
    CorpusStats { rows }
}

/// Repeat every pair `factor` times, all copies of pair i before pair i+1,
/// with ids remapped sequentially.
pub fn upsample(pairs: &[SentencePair], factor: usize) -> Result<Vec<SentencePair>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("up-sampling factor must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(pairs.len() * factor);
    for pair in pairs {
        for _ in 0..factor {
            let mut copy = pair.clone();
            copy.id = out.len();
            out.push(copy);
        }
    }
    Ok(out)
}

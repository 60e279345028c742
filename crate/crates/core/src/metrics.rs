//! Terminology-targeted and generic MT evaluation, aggregated into an
//! [`EvalReport`]: exact-match accuracy, window overlap, 1-TERm and BLEU.
//!
//! Occurrence bookkeeping is shared across the terminology metrics:
//! instances of the same target term consume distinct, non-overlapping
//! occurrences greedily left to right, independently in the reference and
//! the hypothesis.

pub mod bleu;
pub mod ter;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use bleu::bleu;
pub use ter::{one_minus_term, ter, ter_no_shift, ter_script, term_ter, EditOp, EditScript};

use crate::corpus::ConstraintSpan;
use crate::error::{Error, Result};
use crate::matcher::CasingPolicy;

/// Per-corpus metric bundle, fractions in [0, 1]. BLEU is stored as a
/// fraction; the table renderer prints it times 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub exact_match: f64,
    pub window_overlap_2: f64,
    pub window_overlap_3: f64,
    pub one_minus_term: f64,
    pub sentences: usize,
    pub constraint_instances: usize,
    pub matched_instances: usize,
    /// Instances whose target was absent from the reference; they are
    /// excluded from window overlap and TERm weighting.
    pub skipped_window_instances: usize,
}

impl EvalReport {
    /// Aligned text table with one header row and one value row.
    pub fn render_table(&self) -> String {
        let columns = [
            ("BLEU", format!("{:.2}", self.bleu * 100.0)),
            ("Exact-Match Accuracy", format!("{:.3}", self.exact_match)),
            ("Window Overlap (2)", format!("{:.3}", self.window_overlap_2)),
            ("Window Overlap (3)", format!("{:.3}", self.window_overlap_3)),
            ("1-TERm", format!("{:.3}", self.one_minus_term)),
        ];
        let mut header = String::new();
        let mut values = String::new();
        for (i, (name, value)) in columns.iter().enumerate() {
            if i > 0 {
                header.push_str("  ");
                values.push_str("  ");
            }
            let width = name.len().max(value.len());
            header.push_str(&format!("{name:>width$}"));
            values.push_str(&format!("{value:>width$}"));
        }
        format!("{header}\n{values}\n")
    }
}

fn fold_tokens(tokens: &[String], casing: CasingPolicy) -> Vec<String> {
    tokens.iter().map(|t| casing.fold(t)).collect()
}

/// Start positions of up to `limit` non-overlapping occurrences of `needle`,
/// scanned left to right.
fn greedy_occurrences(haystack: &[String], needle: &[String], limit: usize) -> Vec<usize> {
    let mut positions = Vec::new();
    if needle.is_empty() || needle.len() > haystack.len() {
        return positions;
    }
    let mut pos = 0usize;
    while positions.len() < limit && pos + needle.len() <= haystack.len() {
        if haystack[pos..pos + needle.len()] == needle[..] {
            positions.push(pos);
            pos += needle.len();
        } else {
            pos += 1;
        }
    }
    positions
}

/// Per-instance occurrence assignment for one sentence: `ref_pos[i]` and
/// `hyp_pos[i]` give the start of the occurrence consumed by instance i in
/// the reference and hypothesis respectively.
struct Assignment {
    ref_pos: Vec<Option<usize>>,
    hyp_pos: Vec<Option<usize>>,
}

fn assign_occurrences(
    constraints: &[ConstraintSpan],
    reference: Option<&[String]>,
    hypothesis: &[String],
    casing: CasingPolicy,
) -> Assignment {
    let folded_hyp = fold_tokens(hypothesis, casing);
    let folded_ref = reference.map(|r| fold_tokens(r, casing));
    // group instance indices by folded target
    let mut groups: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    for (i, c) in constraints.iter().enumerate() {
        groups.entry(fold_tokens(&c.chosen_target, casing)).or_default().push(i);
    }
    let mut ref_pos = vec![None; constraints.len()];
    let mut hyp_pos = vec![None; constraints.len()];
    for (target, members) in groups {
        let hyp_occurrences = greedy_occurrences(&folded_hyp, &target, members.len());
        for (slot, &instance) in members.iter().enumerate() {
            hyp_pos[instance] = hyp_occurrences.get(slot).copied();
        }
        if let Some(folded_ref) = &folded_ref {
            let ref_occurrences = greedy_occurrences(folded_ref, &target, members.len());
            for (slot, &instance) in members.iter().enumerate() {
                ref_pos[instance] = ref_occurrences.get(slot).copied();
            }
        }
    }
    Assignment { ref_pos, hyp_pos }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactMatchCounts {
    pub matched: usize,
    pub instances: usize,
}

/// Count constraint instances whose chosen target occurs in the hypothesis.
pub fn exact_match_counts(
    hypotheses: &[Vec<String>],
    constraints: &[Vec<ConstraintSpan>],
    casing: CasingPolicy,
) -> Result<ExactMatchCounts> {
    if hypotheses.len() != constraints.len() {
        return Err(Error::Metric(format!(
            "hypothesis/constraint length mismatch {} vs {}",
            hypotheses.len(),
            constraints.len()
        )));
    }
    let mut counts = ExactMatchCounts::default();
    for (hyp, sentence_constraints) in hypotheses.iter().zip(constraints) {
        counts.instances += sentence_constraints.len();
        let assignment = assign_occurrences(sentence_constraints, None, hyp, casing);
        counts.matched += assignment.hyp_pos.iter().filter(|p| p.is_some()).count();
    }
    Ok(counts)
}

/// Fraction of constraint instances present in the hypotheses.
pub fn exact_match_accuracy(
    hypotheses: &[Vec<String>],
    constraints: &[Vec<ConstraintSpan>],
    casing: CasingPolicy,
) -> Result<f64> {
    let counts = exact_match_counts(hypotheses, constraints, casing)?;
    if counts.instances == 0 {
        return Err(Error::NoConstraints);
    }
    Ok(counts.matched as f64 / counts.instances as f64)
}

/// Window scores pooled over one sentence's instances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowTally {
    pub score_sum: f64,
    pub scored: usize,
    /// Instances whose target is absent from the reference.
    pub skipped: usize,
}

impl WindowTally {
    fn merge(&mut self, other: WindowTally) {
        self.score_sum += other.score_sum;
        self.scored += other.scored;
        self.skipped += other.skipped;
    }

    pub fn mean(&self) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            self.score_sum / self.scored as f64
        }
    }
}

fn multiset_intersection_size(a: &[String], b: &[String]) -> usize {
    let mut counts: HashMap<&String, isize> = HashMap::new();
    for token in a {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut size = 0usize;
    for token in b {
        if let Some(remaining) = counts.get_mut(token) {
            if *remaining > 0 {
                *remaining -= 1;
                size += 1;
            }
        }
    }
    size
}

fn window_around(tokens: &[String], start: usize, len: usize, n: usize) -> Vec<String> {
    let left = start.saturating_sub(n);
    let right = (start + len + n).min(tokens.len());
    let mut window = tokens[left..start].to_vec();
    window.extend_from_slice(&tokens[start + len..right]);
    window
}

/// Window overlap for one sentence: per instance found in both sides, the
/// multiset overlap of the up-to-n tokens on each side of the term, divided
/// by the attainable reference window size. Instances missing from the
/// hypothesis score 0; instances missing from the reference are skipped.
pub fn window_overlap(
    hypothesis: &[String],
    reference: &[String],
    constraints: &[ConstraintSpan],
    n: usize,
    casing: CasingPolicy,
) -> Result<WindowTally> {
    if n < 1 {
        return Err(Error::Metric("window size must be at least 1".into()));
    }
    let folded_hyp = fold_tokens(hypothesis, casing);
    let folded_ref = fold_tokens(reference, casing);
    let assignment = assign_occurrences(constraints, Some(reference), hypothesis, casing);
    let mut tally = WindowTally::default();
    for (i, constraint) in constraints.iter().enumerate() {
        let len = constraint.chosen_target.len();
        let Some(ref_start) = assignment.ref_pos[i] else {
            tally.skipped += 1;
            continue;
        };
        let Some(hyp_start) = assignment.hyp_pos[i] else {
            tally.scored += 1; // absent from the hypothesis: scores 0
            continue;
        };
        let ref_window = window_around(&folded_ref, ref_start, len, n);
        let hyp_window = window_around(&folded_hyp, hyp_start, len, n);
        let score = if ref_window.is_empty() {
            1.0
        } else {
            multiset_intersection_size(&ref_window, &hyp_window) as f64 / ref_window.len() as f64
        };
        tally.score_sum += score;
        tally.scored += 1;
    }
    Ok(tally)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub term_weight: f64,
    pub casing: CasingPolicy,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { term_weight: 2.0, casing: CasingPolicy::CaseInsensitive }
    }
}

/// Compute the full metric suite over aligned hypotheses, references and
/// per-sentence constraints.
pub fn evaluate(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
    constraints: &[Vec<ConstraintSpan>],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::LineCountMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if hypotheses.len() != constraints.len() {
        return Err(Error::LineCountMismatch {
            left: hypotheses.len(),
            right: constraints.len(),
        });
    }

    let exact = exact_match_counts(hypotheses, constraints, options.casing)?;
    if exact.instances == 0 {
        return Err(Error::NoConstraints);
    }

    let mut window2 = WindowTally::default();
    let mut window3 = WindowTally::default();
    let mut term_cost = 0.0f64;
    let mut term_norm = 0.0f64;
    for ((hyp, reference), sentence_constraints) in
        hypotheses.iter().zip(references).zip(constraints)
    {
        window2.merge(window_overlap(hyp, reference, sentence_constraints, 2, options.casing)?);
        window3.merge(window_overlap(hyp, reference, sentence_constraints, 3, options.casing)?);

        let assignment =
            assign_occurrences(sentence_constraints, Some(reference), hyp, options.casing);
        let spans: Vec<(usize, usize)> = sentence_constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                assignment.ref_pos[i].map(|start| (start, start + c.chosen_target.len()))
            })
            .collect();
        let (cost, norm) =
            ter::term_ter_components(hyp, reference, &spans, options.term_weight)?;
        term_cost += cost;
        term_norm += norm;
    }

    Ok(EvalReport {
        bleu: bleu(hypotheses, references)?,
        exact_match: exact.matched as f64 / exact.instances as f64,
        window_overlap_2: window2.mean(),
        window_overlap_3: window3.mean(),
        one_minus_term: (1.0 - term_cost / term_norm).clamp(0.0, 1.0),
        sentences: hypotheses.len(),
        constraint_instances: exact.instances,
        matched_instances: exact.matched,
        skipped_window_instances: window2.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn constraint(target: &str) -> ConstraintSpan {
        ConstraintSpan {
            start: 0,
            end: 1,
            source_term: toks("src"),
            chosen_target: toks(target),
        }
    }

    #[test]
    fn exact_match_all_present() {
        let hyps = vec![toks("le vaccin et les vaccins contre épidémie de coronavirus")];
        let constraints = vec![vec![
            constraint("vaccin"),
            constraint("vaccins"),
            constraint("épidémie de coronavirus"),
        ]];
        let accuracy =
            exact_match_accuracy(&hyps, &constraints, CasingPolicy::CaseInsensitive).unwrap();
        assert_eq!(accuracy, 1.0);
    }

    #[test]
    fn exact_match_absent_term() {
        let hyps = vec![toks("le produit est sûr")];
        let constraints = vec![vec![constraint("vaccin")]];
        let accuracy =
            exact_match_accuracy(&hyps, &constraints, CasingPolicy::CaseInsensitive).unwrap();
        assert_eq!(accuracy, 0.0);
    }

    #[test]
    fn exact_match_counts_distinct_occurrences() {
        // 4 instances of the same term, only 2 non-overlapping occurrences
        let hyps = vec![toks("vaccin x vaccin y")];
        let constraints = vec![vec![
            constraint("vaccin"),
            constraint("vaccin"),
            constraint("vaccin"),
            constraint("vaccin"),
        ]];
        let accuracy =
            exact_match_accuracy(&hyps, &constraints, CasingPolicy::CaseInsensitive).unwrap();
        assert_eq!(accuracy, 0.5);
    }

    // exhaustive assignment oracle: maximum number of instances that can be
    // satisfied by pairwise non-overlapping occurrences, per target group
    fn oracle_max_matched(hyp: &[String], constraints: &[ConstraintSpan]) -> usize {
        fn occurrences(h: &[String], t: &[String]) -> Vec<(usize, usize)> {
            if t.is_empty() || t.len() > h.len() {
                return vec![];
            }
            (0..=(h.len() - t.len()))
                .filter(|&i| &h[i..i + t.len()] == t)
                .map(|i| (i, i + t.len()))
                .collect()
        }
        fn max_disjoint(occs: &[(usize, usize)], chosen: Vec<(usize, usize)>, k: usize) -> usize {
            if k == 0 || occs.is_empty() {
                return chosen.len();
            }
            let mut best = chosen.len();
            for (i, occ) in occs.iter().enumerate() {
                if chosen.iter().all(|c| occ.1 <= c.0 || c.1 <= occ.0) {
                    let mut next = chosen.clone();
                    next.push(*occ);
                    best = best.max(max_disjoint(&occs[i + 1..], next, k - 1));
                }
            }
            best
        }
        let mut groups: HashMap<Vec<String>, usize> = HashMap::new();
        for c in constraints {
            *groups.entry(c.chosen_target.clone()).or_default() += 1;
        }
        groups
            .into_iter()
            .map(|(target, k)| {
                let occs = occurrences(hyp, &target);
                max_disjoint(&occs, Vec::new(), k)
            })
            .sum()
    }

    #[test]
    fn exact_match_equals_assignment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let vocab = ["a", "b", "c"];
        for _ in 0..300 {
            let hyp: Vec<String> = (0..rng.gen_range(1..10))
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect();
            let n_constraints = rng.gen_range(1..5);
            let constraints: Vec<ConstraintSpan> = (0..n_constraints)
                .map(|_| {
                    let len = rng.gen_range(1..3);
                    let target: Vec<String> = (0..len)
                        .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                        .collect();
                    ConstraintSpan {
                        start: 0,
                        end: 1,
                        source_term: toks("s"),
                        chosen_target: target,
                    }
                })
                .collect();
            let counts = exact_match_counts(
                std::slice::from_ref(&hyp),
                std::slice::from_ref(&constraints),
                CasingPolicy::Exact,
            )
            .unwrap();
            assert_eq!(
                counts.matched,
                oracle_max_matched(&hyp, &constraints),
                "hyp {hyp:?} constraints {constraints:?}"
            );
        }
    }

    #[test]
    fn exact_match_without_constraints_is_an_error() {
        let hyps = vec![toks("a b")];
        let err = exact_match_accuracy(&hyps, &[vec![]], CasingPolicy::Exact).unwrap_err();
        assert_eq!(err.to_string(), "no constraints to score");
    }

    #[test]
    fn window_overlap_identical_sentences() {
        let s = toks("a b T c d");
        let tally = window_overlap(&s, &s, &[constraint("T")], 2, CasingPolicy::Exact).unwrap();
        assert_eq!(tally.mean(), 1.0);
    }

    #[test]
    fn window_overlap_hand_enumerated_example() {
        let reference = toks("a b T c d");
        let hypothesis = toks("x b T c y");
        let tally =
            window_overlap(&hypothesis, &reference, &[constraint("T")], 2, CasingPolicy::Exact)
                .unwrap();
        assert_eq!(tally.scored, 1);
        assert!((tally.mean() - 0.5).abs() < 1e-12, "mean {}", tally.mean());
    }

    #[test]
    fn window_overlap_absent_term_scores_zero() {
        let reference = toks("a b T c d");
        let hypothesis = toks("nothing here at all");
        let tally =
            window_overlap(&hypothesis, &reference, &[constraint("T")], 2, CasingPolicy::Exact)
                .unwrap();
        assert_eq!(tally.scored, 1);
        assert_eq!(tally.mean(), 0.0);
    }

    #[test]
    fn window_overlap_skips_terms_missing_from_reference() {
        let reference = toks("no term here");
        let hypothesis = toks("T is present");
        let tally =
            window_overlap(&hypothesis, &reference, &[constraint("T")], 2, CasingPolicy::Exact)
                .unwrap();
        assert_eq!(tally.skipped, 1);
        assert_eq!(tally.scored, 0);
    }

    #[test]
    fn window_overlap_rejects_zero_window() {
        let s = toks("a");
        assert!(window_overlap(&s, &s, &[], 0, CasingPolicy::Exact).is_err());
    }

    #[test]
    fn window_overlap_ignores_tokens_outside_the_window() {
        let reference = toks("p q a b T c d r s");
        let hypothesis = toks("p q x b T c y r s");
        let constraints = [constraint("T")];
        let before =
            window_overlap(&hypothesis, &reference, &constraints, 2, CasingPolicy::Exact).unwrap();
        // replace tokens more than n away from the term on both sides
        let mut far_hyp = hypothesis.clone();
        far_hyp[0] = "zz".into();
        far_hyp[8] = "ww".into();
        let after =
            window_overlap(&far_hyp, &reference, &constraints, 2, CasingPolicy::Exact).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn window_overlap_truncates_at_boundaries() {
        // term at the start: ref window is only the right side
        let reference = toks("T c d");
        let hypothesis = toks("T c x");
        let tally =
            window_overlap(&hypothesis, &reference, &[constraint("T")], 2, CasingPolicy::Exact)
                .unwrap();
        // ref window {c, d}, hyp window {c, x}: overlap 1 of 2
        assert!((tally.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_perfect_hypothesis_scores_all_ones() {
        let refs = vec![
            toks("le vaccin est sûr"),
            toks("une épidémie de coronavirus se produit"),
        ];
        let constraints = vec![
            vec![constraint("vaccin")],
            vec![constraint("épidémie de coronavirus")],
        ];
        let report = evaluate(&refs, &refs, &constraints, &EvalOptions::default()).unwrap();
        assert_eq!(report.bleu, 1.0);
        assert_eq!(report.exact_match, 1.0);
        assert_eq!(report.window_overlap_2, 1.0);
        assert_eq!(report.window_overlap_3, 1.0);
        assert_eq!(report.one_minus_term, 1.0);
        assert_eq!(report.sentences, 2);
        assert_eq!(report.constraint_instances, 2);
        assert_eq!(report.matched_instances, 2);
    }

    #[test]
    fn evaluate_copy_oracle_separates_constraints_from_fluency() {
        // hypotheses contain every target verbatim but garbled context
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let filler = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"];
        let garble = ["nu", "xi", "omicron", "pi", "rho", "sigma"];
        let mut refs = Vec::new();
        let mut hyps = Vec::new();
        let mut constraints = Vec::new();
        for _ in 0..50 {
            let target: Vec<String> = (0..rng.gen_range(1..3))
                .map(|_| format!("term{}", rng.gen_range(0..20)))
                .collect();
            let mut reference: Vec<String> = (0..6)
                .map(|_| filler[rng.gen_range(0..filler.len())].to_string())
                .collect();
            reference.splice(3..3, target.clone());
            let mut hypothesis: Vec<String> = (0..6)
                .map(|_| garble[rng.gen_range(0..garble.len())].to_string())
                .collect();
            hypothesis.splice(2..2, target.clone());
            refs.push(reference);
            hyps.push(hypothesis);
            constraints.push(vec![ConstraintSpan {
                start: 0,
                end: 1,
                source_term: toks("s"),
                chosen_target: target,
            }]);
        }
        let report = evaluate(&hyps, &refs, &constraints, &EvalOptions::default()).unwrap();
        assert_eq!(report.exact_match, 1.0);
        assert!(report.bleu < 0.5, "bleu {}", report.bleu);
    }

    #[test]
    fn evaluate_aggregation_is_order_invariant() {
        let refs = vec![toks("a T b"), toks("c U d e"), toks("T T x")];
        let hyps = vec![toks("a T b"), toks("c x d U"), toks("T y T")];
        let constraints = vec![
            vec![constraint("T")],
            vec![constraint("U")],
            vec![constraint("T"), constraint("T")],
        ];
        let report = evaluate(&hyps, &refs, &constraints, &EvalOptions::default()).unwrap();
        let order = [2usize, 0, 1];
        let hyps2: Vec<_> = order.iter().map(|&i| hyps[i].clone()).collect();
        let refs2: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
        let constraints2: Vec<_> = order.iter().map(|&i| constraints[i].clone()).collect();
        let report2 = evaluate(&hyps2, &refs2, &constraints2, &EvalOptions::default()).unwrap();
        assert!((report.bleu - report2.bleu).abs() < 1e-12);
        assert_eq!(report.exact_match, report2.exact_match);
        assert!((report.window_overlap_2 - report2.window_overlap_2).abs() < 1e-12);
        assert!((report.one_minus_term - report2.one_minus_term).abs() < 1e-12);
    }

    #[test]
    fn report_table_has_expected_columns() {
        let report = EvalReport {
            bleu: 0.449,
            exact_match: 0.919,
            window_overlap_2: 0.344,
            window_overlap_3: 0.335,
            one_minus_term: 0.598,
            sentences: 2100,
            constraint_instances: 1000,
            matched_instances: 919,
            skipped_window_instances: 0,
        };
        let table = report.render_table();
        for column in ["BLEU", "Exact-Match Accuracy", "Window Overlap (2)", "Window Overlap (3)", "1-TERm"] {
            assert!(table.contains(column), "missing column {column}");
        }
        assert!(table.contains("44.90"), "BLEU must render times 100: {table}");
        assert!(table.contains("0.919"));
    }

    #[test]
    fn evaluate_rejects_mismatched_lengths() {
        let a = vec![toks("a")];
        let b = vec![toks("a"), toks("b")];
        let c = vec![vec![constraint("a")]];
        assert!(evaluate(&a, &b, &c, &EvalOptions::default()).is_err());
    }
}

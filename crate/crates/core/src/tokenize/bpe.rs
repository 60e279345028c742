//! Byte-pair-encoding subword segmentation: greedy merge learning, rank-order
//! application with an `@@` continuation convention, and the exact inverse.
//!
//! Reserved symbols (annotation tags and the mask token) never enter merge
//! statistics and always pass through segmentation atomically.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DEFAULT_MARKER: &str = "@@";

/// An ordered list of learned merges plus the reserved atomic symbols.
/// Merge rank equals list position; application replays merges in rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    marker: String,
    reserved: BTreeSet<String>,
    ranks: HashMap<(String, String), usize>,
}

impl MergeTable {
    pub fn new(
        merges: Vec<(String, String)>,
        marker: &str,
        reserved: BTreeSet<String>,
    ) -> Result<Self> {
        if marker.is_empty() {
            return Err(Error::Bpe("continuation marker must be non-empty".into()));
        }
        for (left, right) in &merges {
            let joined = format!("{left}{right}");
            if reserved.contains(left) || reserved.contains(right) || reserved.contains(&joined) {
                return Err(Error::Bpe(format!(
                    "merge {left:?}+{right:?} involves a reserved symbol"
                )));
            }
        }
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, pair)| (pair.clone(), rank))
            .collect();
        Ok(MergeTable { merges, marker: marker.to_string(), reserved, ranks })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn reserved(&self) -> &BTreeSet<String> {
        &self.reserved
    }

    /// Segment one token. Reserved tokens come back as a single untouched
    /// symbol; otherwise the token is split into characters and merges are
    /// replayed in rank order, with every subword but the last carrying the
    /// continuation marker.
    pub fn segment_token(&self, token: &str) -> Vec<String> {
        if self.reserved.contains(token) {
            return vec![token.to_string()];
        }
        let mut symbols: Vec<String> = token.chars().map(|c| c.to_string()).collect();
        if symbols.len() <= 1 {
            return vec![token.to_string()];
        }
        loop {
            // lowest-rank pair present in the current symbol sequence
            let mut best: Option<(usize, (String, String))> = None;
            for window in symbols.windows(2) {
                let pair = (window[0].clone(), window[1].clone());
                if let Some(&rank) = self.ranks.get(&pair) {
                    if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                        best = Some((rank, pair));
                    }
                }
            }
            let Some((_, (left, right))) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
            if symbols.len() == 1 {
                break;
            }
        }
        let last = symbols.len() - 1;
        for sym in &mut symbols[..last] {
            sym.push_str(&self.marker);
        }
        symbols
    }

    /// Segment a token sequence ([`segment_token`] over each token).
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        for token in tokens {
            out.extend(self.segment_token(token));
        }
        out
    }

    /// Undo [`apply`]: join marked subwords with their successors.
    pub fn undo(&self, subwords: &[String]) -> Result<Vec<String>> {
        bpe_undo(subwords, &self.marker)
    }
}

/// Exact inverse of segmentation: concatenate every marker-suffixed subword
/// with what follows. A marker on the final subword is an error.
pub fn bpe_undo(subwords: &[String], marker: &str) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(subwords.len());
    let mut pending = String::new();
    for sub in subwords {
        match sub.strip_suffix(marker) {
            Some(head) => pending.push_str(head),
            None => {
                pending.push_str(sub);
                out.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::Bpe(format!(
            "dangling continuation marker {marker:?} at sequence end"
        )));
    }
    Ok(out)
}

/// Count token frequencies over an iterator of token sequences.
pub fn word_frequencies<'a, I>(sentences: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut freqs = BTreeMap::new();
    for sentence in sentences {
        for token in sentence {
            *freqs.entry(token.clone()).or_insert(0) += 1;
        }
    }
    freqs
}

struct LearnState {
    // interned symbol strings
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    // word type -> (symbol ids, frequency)
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), i64>,
    pair_words: HashMap<(u32, u32), HashSet<usize>>,
    reserved: BTreeSet<String>,
}

impl LearnState {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    fn pair_allowed(&self, pair: (u32, u32)) -> bool {
        let left = &self.symbols[pair.0 as usize];
        let right = &self.symbols[pair.1 as usize];
        if self.reserved.contains(left) || self.reserved.contains(right) {
            return false;
        }
        !self.reserved.contains(&format!("{left}{right}"))
    }

    fn word_pair_multiset(&self, word: &[u32]) -> HashMap<(u32, u32), i64> {
        let mut pairs = HashMap::new();
        for window in word.windows(2) {
            *pairs.entry((window[0], window[1])).or_insert(0) += 1;
        }
        pairs
    }

    fn add_word_pairs(&mut self, word_idx: usize) {
        let (word, freq) = self.words[word_idx].clone();
        for (pair, n) in self.word_pair_multiset(&word) {
            if !self.pair_allowed(pair) {
                continue;
            }
            *self.pair_counts.entry(pair).or_insert(0) += n * freq as i64;
            self.pair_words.entry(pair).or_default().insert(word_idx);
        }
    }

    fn remove_word_pairs(&mut self, word_idx: usize) {
        let (word, freq) = self.words[word_idx].clone();
        for (pair, n) in self.word_pair_multiset(&word) {
            if !self.pair_allowed(pair) {
                continue;
            }
            if let Some(count) = self.pair_counts.get_mut(&pair) {
                *count -= n * freq as i64;
                if *count <= 0 {
                    self.pair_counts.remove(&pair);
                }
            }
            if let Some(words) = self.pair_words.get_mut(&pair) {
                words.remove(&word_idx);
                if words.is_empty() {
                    self.pair_words.remove(&pair);
                }
            }
        }
    }

    /// Highest count wins; ties break on the lexicographically smallest
    /// (left, right) symbol pair.
    fn best_pair(&self) -> Option<(u32, u32)> {
        type Candidate<'a> = ((u32, u32), i64, (&'a str, &'a str));
        let mut best: Option<Candidate> = None;
        for (&pair, &count) in &self.pair_counts {
            if count < 1 {
                continue;
            }
            let strs = (
                self.symbols[pair.0 as usize].as_str(),
                self.symbols[pair.1 as usize].as_str(),
            );
            let better = match &best {
                None => true,
                Some((_, c, s)) => count > *c || (count == *c && strs < *s),
            };
            if better {
                best = Some((pair, count, strs));
            }
        }
        best.map(|(pair, _, _)| pair)
    }

    fn merge_pair(&mut self, pair: (u32, u32)) {
        let merged_str = format!(
            "{}{}",
            self.symbols[pair.0 as usize], self.symbols[pair.1 as usize]
        );
        let merged = self.intern(&merged_str);
        let affected: Vec<usize> = self
            .pair_words
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        for word_idx in affected {
            self.remove_word_pairs(word_idx);
            let old = std::mem::take(&mut self.words[word_idx].0);
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && old[i] == pair.0 && old[i + 1] == pair.1 {
                    new.push(merged);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            self.words[word_idx].0 = new;
            self.add_word_pairs(word_idx);
        }
    }
}

/// Learn up to `num_merges` merges by greedy highest-frequency pair merging.
/// Stops early when no eligible adjacent pair remains. Words equal to a
/// reserved symbol are excluded from the statistics entirely.
pub fn bpe_learn(
    word_freqs: &BTreeMap<String, u64>,
    num_merges: usize,
    reserved: &BTreeSet<String>,
) -> Result<MergeTable> {
    if num_merges == 0 {
        return Err(Error::InvalidArgument("num_merges must be at least 1".into()));
    }
    if word_freqs.is_empty() {
        return Err(Error::Bpe("empty corpus".into()));
    }
    if let Some((word, _)) = word_freqs.iter().find(|(_, &f)| f == 0) {
        return Err(Error::Bpe(format!("word {word:?} has zero frequency")));
    }

    let mut state = LearnState {
        symbols: Vec::new(),
        ids: HashMap::new(),
        words: Vec::new(),
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
        reserved: reserved.clone(),
    };

    for (word, &freq) in word_freqs {
        if reserved.contains(word) {
            continue;
        }
        let ids: Vec<u32> = word
            .chars()
            .map(|c| state.intern(&c.to_string()))
            .collect();
        state.words.push((ids, freq));
    }
    if state.words.is_empty() {
        return Err(Error::Bpe("empty corpus".into()));
    }
    for idx in 0..state.words.len() {
        state.add_word_pairs(idx);
    }

    let mut merges = Vec::new();
    for _ in 0..num_merges {
        let Some(pair) = state.best_pair() else { break };
        merges.push((
            state.symbols[pair.0 as usize].clone(),
            state.symbols[pair.1 as usize].clone(),
        ));
        state.merge_pair(pair);
    }

    MergeTable::new(merges, DEFAULT_MARKER, reserved.clone())
}

/// Write the table: a version header, marker and reserved-symbol comments,
/// then one merge per line ("left right") in rank order. Bit-exact
/// round trip with [`read_merge_table`].
pub fn write_merge_table<W: Write>(table: &MergeTable, mut sink: W) -> Result<()> {
    writeln!(sink, "#version: 1")?;
    writeln!(sink, "#marker: {}", table.marker)?;
    let reserved: Vec<&str> = table.reserved.iter().map(String::as_str).collect();
    writeln!(sink, "#reserved: {}", reserved.join(" "))?;
    for (left, right) in &table.merges {
        writeln!(sink, "{left} {right}")?;
    }
    Ok(())
}

pub fn read_merge_table<R: BufRead>(reader: R) -> Result<MergeTable> {
    let mut marker = DEFAULT_MARKER.to_string();
    let mut reserved = BTreeSet::new();
    let mut merges = Vec::new();
    let mut saw_version = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if !line.starts_with("#version") {
                return Err(Error::MergeTableFormat("missing #version header".into()));
            }
            saw_version = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix("#marker:") {
            marker = rest.trim().to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix("#reserved:") {
            reserved = rest.split_whitespace().map(str::to_string).collect();
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(left), Some(right), None) if !left.is_empty() && !right.is_empty() => {
                merges.push((left.to_string(), right.to_string()));
            }
            _ => {
                return Err(Error::MergeTableFormat(format!(
                    "line {}: expected \"left right\"",
                    idx + 1
                )))
            }
        }
    }
    if !saw_version {
        return Err(Error::MergeTableFormat("missing #version header".into()));
    }
    MergeTable::new(merges, &marker, reserved)
}

/// The default reserved symbols: annotation tags and the mask token.
pub fn default_reserved() -> BTreeSet<String> {
    ["<S>", "<C>", "</C>", "MASK"].iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_freqs() -> BTreeMap<String, u64> {
        [("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)]
            .iter()
            .map(|(w, f)| (w.to_string(), *f))
            .collect()
    }

    #[test]
    fn toy_corpus_hand_traced_merges() {
        // Traced by hand before implementation: pair counts per round are
        //   round 1: (e,s)=9 (s,t)=9 (w,e)=8 (l,o)=7 (o,w)=7 ... -> (e,s)
        //   round 2: (es,t)=9 -> (es,t)
        //   round 3: (l,o)=7 (o,w)=7 -> (l,o)
        //   round 4: (lo,w)=7 -> (lo,w)
        let table = bpe_learn(&toy_freqs(), 4, &BTreeSet::new()).unwrap();
        let expect: Vec<(String, String)> = [("e", "s"), ("es", "t"), ("l", "o"), ("lo", "w")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(table.merges(), &expect[..]);
    }

    #[test]
    fn zero_merges_rejected() {
        let err = bpe_learn(&toy_freqs(), 0, &BTreeSet::new()).unwrap_err();
        assert!(err.to_string().contains("num_merges"), "{err}");
    }

    #[test]
    fn single_word_single_candidate() {
        let freqs: BTreeMap<String, u64> = [("aa".to_string(), 1)].into_iter().collect();
        let table = bpe_learn(&freqs, 1, &BTreeSet::new()).unwrap();
        assert_eq!(table.merges(), &[("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = bpe_learn(&BTreeMap::new(), 4, &BTreeSet::new()).unwrap_err();
        assert!(err.to_string().contains("empty corpus"), "{err}");
    }

    #[test]
    fn merge_count_never_exceeds_request() {
        let freqs: BTreeMap<String, u64> = [("ab".to_string(), 3)].into_iter().collect();
        let table = bpe_learn(&freqs, 100, &BTreeSet::new()).unwrap();
        assert_eq!(table.merges().len(), 1);
    }

    // Brute-force reference learner: recount every pair from scratch each
    // round. Used to validate the incremental implementation.
    fn naive_learn(freqs: &BTreeMap<String, u64>, rounds: usize) -> Vec<(String, String)> {
        let mut words: Vec<(Vec<String>, u64)> = freqs
            .iter()
            .map(|(w, &f)| (w.chars().map(|c| c.to_string()).collect(), f))
            .collect();
        let mut merges = Vec::new();
        for _ in 0..rounds {
            let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
            for (word, f) in &words {
                for win in word.windows(2) {
                    *counts.entry((win[0].clone(), win[1].clone())).or_insert(0) += f;
                }
            }
            // max count; BTreeMap iteration yields ties in ascending key
            // order, so the first maximal entry is the lexicographic winner
            let Some(best) = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(p, _)| p.clone())
            else {
                break;
            };
            merges.push(best.clone());
            for (word, _) in &mut words {
                let mut new = Vec::with_capacity(word.len());
                let mut i = 0;
                while i < word.len() {
                    if i + 1 < word.len() && word[i] == best.0 && word[i + 1] == best.1 {
                        new.push(format!("{}{}", best.0, best.1));
                        i += 2;
                    } else {
                        new.push(word[i].clone());
                        i += 1;
                    }
                }
                *word = new;
            }
        }
        merges
    }

    #[test]
    fn incremental_learner_matches_naive_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let n_types = rng.gen_range(1..50);
            let mut freqs = BTreeMap::new();
            for _ in 0..n_types {
                let len = rng.gen_range(1..8);
                let word: String = (0..len)
                    .map(|_| (b'a' + rng.gen_range(0..5)) as char)
                    .collect();
                *freqs.entry(word).or_insert(0) += rng.gen_range(1..10);
            }
            let rounds = rng.gen_range(1..12);
            let fast = bpe_learn(&freqs, rounds, &BTreeSet::new()).unwrap();
            let slow = naive_learn(&freqs, rounds);
            assert_eq!(fast.merges(), &slow[..], "freqs: {freqs:?}");
        }
    }

    #[test]
    fn apply_segments_with_continuation_markers() {
        let table = bpe_learn(&toy_freqs(), 4, &BTreeSet::new()).unwrap();
        let toks: Vec<String> = vec!["lowest".into()];
        assert_eq!(table.apply(&toks), vec!["low@@", "est"]);
        // a token that is already a single learned symbol stays unchanged
        let toks: Vec<String> = vec!["low".into()];
        assert_eq!(table.apply(&toks), vec!["low"]);
    }

    #[test]
    fn reserved_tokens_pass_through() {
        let mut freqs = BTreeMap::new();
        freqs.insert("MASKED".to_string(), 50);
        freqs.insert("MASK".to_string(), 50);
        let reserved = default_reserved();
        let table = bpe_learn(&freqs, 30, &reserved).unwrap();
        // no merge may produce the reserved symbol
        for (l, r) in table.merges() {
            assert_ne!(format!("{l}{r}"), "MASK");
        }
        let toks: Vec<String> = vec!["<S>".into(), "MASK".into(), "<C>".into(), "vaccin".into(), "</C>".into()];
        let segmented = table.apply(&toks);
        assert_eq!(segmented[0], "<S>");
        assert_eq!(segmented[1], "MASK");
        assert_eq!(segmented[2], "<C>");
        assert_eq!(*segmented.last().unwrap(), "</C>");
    }

    #[test]
    fn undo_examples() {
        let table = MergeTable::new(vec![], DEFAULT_MARKER, BTreeSet::new()).unwrap();
        let subs: Vec<String> = vec!["vac@@".into(), "cin".into()];
        assert_eq!(table.undo(&subs).unwrap(), vec!["vaccin"]);
        let subs: Vec<String> = vec!["MASK".into()];
        assert_eq!(table.undo(&subs).unwrap(), vec!["MASK"]);
        let subs: Vec<String> = vec!["dangling@@".into()];
        assert!(table.undo(&subs).is_err());
    }

    #[test]
    fn undo_apply_round_trip_random() {
        let table = bpe_learn(&toy_freqs(), 4, &default_reserved()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alphabet = ['l', 'o', 'w', 'e', 's', 't', 'n', 'i', 'd', 'é'];
        for _ in 0..2000 {
            let n = rng.gen_range(1..8);
            let tokens: Vec<String> = (0..n)
                .map(|_| {
                    let len = rng.gen_range(1..10);
                    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
                })
                .collect();
            let round_tripped = table.undo(&table.apply(&tokens)).unwrap();
            assert_eq!(round_tripped, tokens);
        }
    }

    #[test]
    fn merge_table_file_round_trip_is_bit_exact() {
        let table = bpe_learn(&toy_freqs(), 4, &default_reserved()).unwrap();
        let mut buf = Vec::new();
        write_merge_table(&table, &mut buf).unwrap();
        let reloaded = read_merge_table(buf.as_slice()).unwrap();
        assert_eq!(table, reloaded);
        let mut buf2 = Vec::new();
        write_merge_table(&reloaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn merge_table_rejects_reserved_merges() {
        let reserved = default_reserved();
        let err = MergeTable::new(
            vec![("MAS".to_string(), "K".to_string())],
            DEFAULT_MARKER,
            reserved,
        )
        .unwrap_err();
        assert!(err.to_string().contains("reserved"), "{err}");
    }
}

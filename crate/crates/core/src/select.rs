//! In-context ranking and selection: expand per-word candidate sets into full
//! sentence candidates, score each with a pseudo-log-likelihood, pick the
//! best.
//!
//! The reference scorer is an add-k smoothed n-gram language model behind the
//! [`SentenceScorer`] contract so a stronger backend can be swapped in.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rewrite::CandidateSet;

/// Unknown-word symbol of the n-gram scorer.
pub const UNK: &str = "<unk>";
/// Start-of-sentence padding symbol for n-gram histories.
pub const LM_START: &str = "<s>";

/// One fully expanded output sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceCandidate {
    pub tokens: Vec<String>,
    pub changed_positions: BTreeSet<usize>,
    /// Sum of the word-level candidate scores that formed this sentence.
    pub local_score: f64,
    /// Filled in by the scorer; higher is better.
    pub pll: f64,
}

impl SentenceCandidate {
    fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Scores a tokenized sentence; higher is more fluent.
pub trait SentenceScorer: Send + Sync {
    fn score(&self, tokens: &[String]) -> f64;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct HistoryCounts {
    total: u64,
    counts: BTreeMap<String, u64>,
}

/// Add-k smoothed n-gram language model.
///
/// P(w | h) = (c(h,w) + k) / (c(h) + k * (|V| + 1)), the +1 covering the
/// unknown symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramScorer {
    order: usize,
    k: f64,
    vocab: BTreeSet<String>,
    histories: BTreeMap<String, HistoryCounts>,
}

/// Estimates an n-gram scorer from tokenized sentences.
pub fn train_lm(sentences: &[Vec<String>], order: usize, k: f64) -> Result<NgramScorer> {
    if order < 1 {
        return Err(Error::InvalidValue("n-gram order must be >= 1".to_string()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidValue("smoothing constant must be > 0".to_string()));
    }
    let mut scorer = NgramScorer { order, k, vocab: BTreeSet::new(), histories: BTreeMap::new() };
    for sentence in sentences {
        for token in sentence {
            scorer.vocab.insert(token.clone());
        }
        for i in 0..sentence.len() {
            let hist = scorer.history_key_at(sentence, i);
            let entry = scorer.histories.entry(hist).or_default();
            entry.total += 1;
            *entry.counts.entry(sentence[i].clone()).or_insert(0) += 1;
        }
    }
    Ok(scorer)
}

impl NgramScorer {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains(token)
    }

    fn map_token<'a>(&self, token: &'a str) -> &'a str {
        if self.vocab.contains(token) {
            token
        } else {
            UNK
        }
    }

    /// History key for position `i`: the previous `order - 1` tokens with
    /// start padding, unknown tokens mapped to the unknown symbol.
    fn history_key_at(&self, tokens: &[String], i: usize) -> String {
        let needed = self.order - 1;
        let mut parts: Vec<&str> = Vec::with_capacity(needed);
        for back in (1..=needed).rev() {
            if i >= back {
                parts.push(self.map_token(&tokens[i - back]));
            } else {
                parts.push(LM_START);
            }
        }
        parts.join(" ")
    }

    /// Smoothed conditional probability of `token` given a history key.
    pub fn prob(&self, token: &str, history_key: &str) -> f64 {
        let token = self.map_token(token);
        let (count, total) = match self.histories.get(history_key) {
            Some(h) => (h.counts.get(token).copied().unwrap_or(0), h.total),
            None => (0, 0),
        };
        (count as f64 + self.k) / (total as f64 + self.k * (self.vocab.len() as f64 + 1.0))
    }

    /// Pseudo-log-likelihood: the chain-rule sum of per-position conditional
    /// log probabilities. Empty input scores 0.
    pub fn pll_score(&self, tokens: &[String]) -> f64 {
        let mut total = 0.0;
        for i in 0..tokens.len() {
            let hist = self.history_key_at(tokens, i);
            let p = self.prob(&tokens[i], &hist);
            // Add-k keeps p strictly positive; floor defensively anyway.
            total += p.max(f64::MIN_POSITIVE).ln();
        }
        total
    }
}

impl SentenceScorer for NgramScorer {
    fn score(&self, tokens: &[String]) -> f64 {
        self.pll_score(tokens)
    }
}

#[derive(PartialEq)]
struct FrontierItem {
    score: f64,
    indices: Vec<usize>,
    tokens: Vec<String>,
}

impl Eq for FrontierItem {}

impl Ord for FrontierItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on score, ties by ascending token sequence.
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.tokens.cmp(&self.tokens))
    }
}

impl PartialOrd for FrontierItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Expands per-word candidate sets into the `cap` best full-sentence
/// candidates by summed local score.
///
/// Each word's set is pre-pruned to its `per_word_k` best candidates. The
/// expansion is an exact best-first enumeration of the Cartesian product, so
/// the result equals brute-force enumeration plus sorting. Ties break on the
/// token sequence, making the output deterministic.
pub fn expand_candidates(
    sentence: &[String],
    per_word: &BTreeMap<usize, CandidateSet>,
    cap: usize,
    per_word_k: usize,
) -> Vec<SentenceCandidate> {
    assert!(cap >= 1, "cap must be >= 1");
    assert!(per_word_k >= 1, "per_word_k must be >= 1");
    // Positions with candidates, each pruned to its top per_word_k.
    let positions: Vec<(usize, Vec<(&str, f64)>)> = per_word
        .iter()
        .filter(|(pos, set)| **pos < sentence.len() && !set.candidates.is_empty())
        .map(|(pos, set)| {
            let cands: Vec<(&str, f64)> = set
                .candidates
                .iter()
                .take(per_word_k)
                .map(|c| (c.surface.as_str(), c.score))
                .collect();
            (*pos, cands)
        })
        .collect();

    let build = |indices: &[usize]| -> (Vec<String>, f64) {
        let mut tokens: Vec<String> = sentence.to_vec();
        let mut score = 0.0;
        for ((pos, cands), &choice) in positions.iter().zip(indices) {
            tokens[*pos] = cands[choice].0.to_string();
            score += cands[choice].1;
        }
        (tokens, score)
    };

    let start = vec![0usize; positions.len()];
    let (tokens, score) = build(&start);
    let mut heap = BinaryHeap::new();
    heap.push(FrontierItem { score, indices: start.clone(), tokens });
    let mut seen: HashSet<Vec<usize>> = HashSet::from([start]);
    let mut out = Vec::with_capacity(cap.min(64));
    while let Some(item) = heap.pop() {
        for (slot, (_, cands)) in positions.iter().enumerate() {
            if item.indices[slot] + 1 < cands.len() {
                let mut next = item.indices.clone();
                next[slot] += 1;
                if seen.insert(next.clone()) {
                    let (tokens, score) = build(&next);
                    heap.push(FrontierItem { score, indices: next, tokens });
                }
            }
        }
        let changed_positions = item
            .tokens
            .iter()
            .zip(sentence)
            .enumerate()
            .filter(|(_, (t, s))| t != s)
            .map(|(i, _)| i)
            .collect();
        out.push(SentenceCandidate {
            tokens: item.tokens,
            changed_positions,
            local_score: item.score,
            pll: 0.0,
        });
        if out.len() == cap {
            break;
        }
    }
    out
}

/// Fills each candidate's pll using the scorer; candidates are scored
/// independently (in parallel when the feature is enabled).
pub fn score_candidates(candidates: &mut [SentenceCandidate], scorer: &dyn SentenceScorer) {
    let plls = exec::map_ordered(candidates, |c| scorer.score(&c.tokens));
    for (c, pll) in candidates.iter_mut().zip(plls) {
        c.pll = pll;
    }
}

/// Picks the best-scored candidate; ties fall to the fewest changed
/// positions, then the lexicographically least joined text.
pub fn select_best(candidates: &[SentenceCandidate]) -> Result<&SentenceCandidate> {
    candidates
        .iter()
        .max_by(|a, b| {
            a.pll
                .total_cmp(&b.pll)
                .then_with(|| b.changed_positions.len().cmp(&a.changed_positions.len()))
                .then_with(|| b.joined().cmp(&a.joined()))
        })
        .ok_or(Error::EmptyCandidateList)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::{Candidate, Provenance};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn set(cands: &[(&str, f64)]) -> CandidateSet {
        CandidateSet::from_candidates(
            cands
                .iter()
                .map(|(s, score)| Candidate {
                    surface: s.to_string(),
                    score: *score,
                    provenance: Provenance::CorpusR,
                })
                .collect(),
        )
    }

    #[test]
    fn two_by_two_product() {
        let sentence = toks("w0 w1 w2");
        let mut per_word = BTreeMap::new();
        per_word.insert(0, set(&[("a", 0.6), ("b", 0.4)]));
        per_word.insert(2, set(&[("c", 0.9), ("d", 0.1)]));
        let out = expand_candidates(&sentence, &per_word, 512, 3);
        assert_eq!(out.len(), 4);
        assert_eq!(out[0].tokens, toks("a w1 c"));
        assert_eq!(out[0].changed_positions, BTreeSet::from([0, 2]));
        assert!((out[0].local_score - 1.5).abs() < 1e-12);
        // Scores non-increasing.
        for pair in out.windows(2) {
            assert!(pair[0].local_score >= pair[1].local_score);
        }
    }

    #[test]
    fn no_candidates_yields_input_singleton() {
        let sentence = toks("w0 w1");
        let out = expand_candidates(&sentence, &BTreeMap::new(), 512, 3);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens, sentence);
        assert!(out[0].changed_positions.is_empty());
        assert_eq!(out[0].local_score, 0.0);
    }

    /// Brute-force expansion: full product, sorted by (score desc, tokens
    /// asc), truncated.
    fn brute_force(
        sentence: &[String],
        per_word: &BTreeMap<usize, CandidateSet>,
        cap: usize,
        per_word_k: usize,
    ) -> Vec<(Vec<String>, f64)> {
        let positions: Vec<(usize, Vec<(&str, f64)>)> = per_word
            .iter()
            .map(|(pos, set)| {
                (
                    *pos,
                    set.candidates
                        .iter()
                        .take(per_word_k)
                        .map(|c| (c.surface.as_str(), c.score))
                        .collect(),
                )
            })
            .collect();
        let mut all: Vec<(Vec<String>, f64)> = vec![(sentence.to_vec(), 0.0)];
        for (pos, cands) in &positions {
            let mut next = Vec::new();
            for (tokens, score) in &all {
                for (surface, s) in cands {
                    let mut t = tokens.clone();
                    t[*pos] = surface.to_string();
                    next.push((t, score + s));
                }
            }
            all = next;
        }
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(cap);
        all
    }

    #[test]
    fn cap_keeps_exactly_the_best_by_local_score() {
        // 10 positions x 3 candidates, cap 512. Scores are distinct powers of
        // two so every combination has a unique sum.
        let sentence: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let mut per_word = BTreeMap::new();
        for pos in 0..10 {
            let s = |j: u32| 1.0 / f64::from(1u32 << (pos as u32 * 3 + j)) * 1e6;
            per_word.insert(
                pos,
                set(&[
                    (&format!("a{pos}"), s(0)),
                    (&format!("b{pos}"), s(1)),
                    (&format!("c{pos}"), s(2)),
                ]),
            );
        }
        let got = expand_candidates(&sentence, &per_word, 512, 3);
        assert_eq!(got.len(), 512);
        let want = brute_force(&sentence, &per_word, 512, 3);
        for (g, (tokens, score)) in got.iter().zip(&want) {
            assert_eq!(&g.tokens, tokens);
            assert!((g.local_score - score).abs() < 1e-9);
        }
    }

    #[test]
    fn per_word_k_prunes_each_set() {
        let sentence = toks("w0");
        let mut per_word = BTreeMap::new();
        per_word.insert(0, set(&[("a", 0.5), ("b", 0.3), ("c", 0.2), ("d", 0.1)]));
        let out = expand_candidates(&sentence, &per_word, 512, 2);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn lm_bigram_hand_computation() {
        let scorer = train_lm(&[toks("a b")], 2, 1.0).unwrap();
        // V = {a, b}; P(b|a) = (1+1)/(1+1*3) = 0.5
        assert!((scorer.prob("b", "a") - 0.5).abs() < 1e-12);
        assert!((scorer.prob("a", LM_START) - 0.5).abs() < 1e-12);
        // `b` never appears as a history, so its context is fully smoothed.
        assert!((scorer.prob("a", "b") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_gives_uniform_probability() {
        let scorer = train_lm(&[], 2, 0.5).unwrap();
        // |V| = 0, so every probability is 1 / (|V|+1) = 1.
        assert!((scorer.prob("x", LM_START) - 1.0).abs() < 1e-12);
        let scorer = train_lm(&[toks("a b c")], 2, 0.5).unwrap();
        let p = scorer.prob("zzz", "unseen-history");
        assert!((p - 1.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one_over_vocab_and_unk() {
        let scorer = train_lm(&[toks("a b a c"), toks("b b a")], 2, 0.1).unwrap();
        for hist in ["a", "b", LM_START, "nonexistent"] {
            let mut sum = 0.0;
            for w in ["a", "b", "c"] {
                sum += scorer.prob(w, hist);
            }
            sum += scorer.prob(UNK, hist);
            assert!((sum - 1.0).abs() < 1e-9, "history {hist}: {sum}");
        }
    }

    #[test]
    fn pll_matches_chain_rule_and_is_order_sensitive() {
        let scorer = train_lm(&[toks("a b")], 2, 1.0).unwrap();
        let ab = scorer.pll_score(&toks("a b"));
        let expect = (0.5f64).ln() + (0.5f64).ln();
        assert!((ab - expect).abs() < 1e-12);
        let ba = scorer.pll_score(&toks("b a"));
        let expect_ba = (0.25f64).ln() + (1.0f64 / 3.0).ln();
        assert!((ba - expect_ba).abs() < 1e-12);
        assert!(ab != ba);
        assert_eq!(scorer.pll_score(&[]), 0.0);
    }

    #[test]
    fn single_token_uses_start_history() {
        let scorer = train_lm(&[toks("a b")], 2, 1.0).unwrap();
        let got = scorer.pll_score(&toks("a"));
        assert!((got - (0.5f64).ln()).abs() < 1e-12);
    }

    fn scored(tokens: &str, changed: &[usize], pll: f64) -> SentenceCandidate {
        SentenceCandidate {
            tokens: toks(tokens),
            changed_positions: changed.iter().copied().collect(),
            local_score: 0.0,
            pll,
        }
    }

    #[test]
    fn select_best_prefers_pll_then_fewest_edits_then_text() {
        let singleton = [scored("a b", &[], -1.0)];
        assert_eq!(select_best(&singleton).unwrap().tokens, toks("a b"));

        let cands = [scored("a b", &[1], -2.0), scored("a c", &[1], -1.0)];
        assert_eq!(select_best(&cands).unwrap().tokens, toks("a c"));

        // Exact tie: the unchanged candidate wins.
        let cands = [scored("a x", &[1], -1.5), scored("a b", &[], -1.5)];
        assert_eq!(select_best(&cands).unwrap().tokens, toks("a b"));

        // Full tie falls to the lexicographically smaller text.
        let cands = [scored("a y", &[1], -1.5), scored("a x", &[1], -1.5)];
        assert_eq!(select_best(&cands).unwrap().tokens, toks("a x"));

        assert!(select_best(&[]).is_err());
    }

    #[test]
    fn unseen_word_candidate_loses() {
        let scorer = train_lm(&[toks("i am happy"), toks("you are happy")], 3, 0.1).unwrap();
        let mut cands = vec![
            scored("i am happy", &[], 0.0),
            scored("i am zzgrlx", &[2], 0.0),
        ];
        score_candidates(&mut cands, &scorer);
        assert_eq!(select_best(&cands).unwrap().tokens, toks("i am happy"));
    }

    #[test]
    fn selection_is_permutation_invariant() {
        let scorer = train_lm(&[toks("a b c"), toks("a c b")], 2, 0.2).unwrap();
        let mut cands = Vec::new();
        for t in ["a b c", "a c b", "b a c", "c b a", "a b b"] {
            cands.push(scored(t, &[0], 0.0));
        }
        score_candidates(&mut cands, &scorer);
        let baseline = select_best(&cands).unwrap().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            cands.shuffle(&mut rng);
            assert_eq!(select_best(&cands).unwrap().tokens, baseline.tokens);
        }
    }

    proptest! {
        #[test]
        fn singleton_sets_expand_to_one_candidate(
            n in 1usize..6,
            cand in "[a-z]{1,4}",
        ) {
            let sentence: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let mut per_word = BTreeMap::new();
            per_word.insert(0, set(&[(cand.as_str(), 1.0)]));
            let out = expand_candidates(&sentence, &per_word, 512, 3);
            prop_assert_eq!(out.len(), 1);
            prop_assert_eq!(&out[0].tokens[0], &cand);
        }

        #[test]
        fn heap_expansion_matches_brute_force(
            seed in 0u64..200,
            positions in 1usize..5,
            cap in 1usize..20,
        ) {
            use rand::Rng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sentence: Vec<String> = (0..positions + 1).map(|i| format!("w{i}")).collect();
            let mut per_word = BTreeMap::new();
            for pos in 0..positions {
                let n = rng.random_range(1..4usize);
                // Full-precision draws so summed scores almost surely stay
                // distinct and both enumerations agree on the order.
                let cands: Vec<(String, f64)> = (0..n)
                    .map(|c| (format!("c{pos}_{c}"), rng.random::<f64>()))
                    .collect();
                let refs: Vec<(&str, f64)> =
                    cands.iter().map(|(s, f)| (s.as_str(), *f)).collect();
                per_word.insert(pos, set(&refs));
            }
            let got = expand_candidates(&sentence, &per_word, cap, 3);
            let want = brute_force(&sentence, &per_word, cap, 3);
            prop_assert_eq!(got.len(), want.len());
            for (g, (tokens, score)) in got.iter().zip(&want) {
                prop_assert!((g.local_score - score).abs() < 1e-9);
                prop_assert_eq!(&g.tokens, tokens);
            }
        }
    }
}

//! Corpus-based rewriter: a bigram maximum-likelihood lookup over aligned
//! training pairs, backing off to a unigram context and finally passing
//! unseen words through.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::RewritePair;
use crate::labels::WordLabel;
use crate::rewrite::{Candidate, CandidateSet, Provenance};

type TargetCounts = BTreeMap<String, u64>;

/// Raw co-occurrence counts; probabilities are normalized at query time so
/// toy counts stay exactly checkable and shards merge losslessly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRewriterModel {
    /// word -> prev -> target label -> target surface -> count
    bigrams: BTreeMap<String, BTreeMap<String, BTreeMap<WordLabel, TargetCounts>>>,
    /// Marginalization of `bigrams` over the previous word; rebuilt on load.
    #[serde(skip)]
    unigrams: BTreeMap<String, BTreeMap<WordLabel, TargetCounts>>,
}

/// Counts the training pairs into a lookup model.
pub fn train_corpusr(pairs: &[RewritePair]) -> CorpusRewriterModel {
    let mut model = CorpusRewriterModel::default();
    for pair in pairs {
        *model
            .bigrams
            .entry(pair.source.clone())
            .or_default()
            .entry(pair.prev.clone())
            .or_default()
            .entry(pair.target_label)
            .or_default()
            .entry(pair.target_surface.clone())
            .or_insert(0) += 1;
    }
    model.rebuild_unigrams();
    model
}

fn mle_set(counts: &TargetCounts) -> CandidateSet {
    let total: u64 = counts.values().sum();
    CandidateSet::from_candidates(
        counts
            .iter()
            .map(|(surface, count)| Candidate {
                surface: surface.clone(),
                score: *count as f64 / total as f64,
                provenance: Provenance::CorpusR,
            })
            .collect(),
    )
}

impl CorpusRewriterModel {
    /// Recomputes the unigram marginals; must run after deserialization.
    pub fn rebuild_unigrams(&mut self) {
        self.unigrams.clear();
        for (word, per_prev) in &self.bigrams {
            let slot = self.unigrams.entry(word.clone()).or_default();
            for per_label in per_prev.values() {
                for (label, targets) in per_label {
                    let merged = slot.entry(*label).or_default();
                    for (surface, count) in targets {
                        *merged.entry(surface.clone()).or_insert(0) += count;
                    }
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.bigrams.keys().map(String::as_str)
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.bigrams.contains_key(word)
    }

    /// All gender alternatives for `(word, prev, target)`: bigram MLE scores
    /// when that exact context was observed, unigram scores when only the
    /// word was, and pass-through otherwise.
    pub fn candidates(&self, word: &str, prev: &str, target: WordLabel) -> CandidateSet {
        if let Some(counts) = self
            .bigrams
            .get(word)
            .and_then(|per_prev| per_prev.get(prev))
            .and_then(|per_label| per_label.get(&target))
        {
            return mle_set(counts);
        }
        if let Some(counts) = self.unigrams.get(word).and_then(|per_label| per_label.get(&target)) {
            return mle_set(counts);
        }
        CandidateSet::pass_through(word)
    }
}

//! Out-of-context word-level gender rewriting.
//!
//! Three rewriters produce gender alternatives for a single word: a
//! corpus-derived bigram maximum-likelihood lookup ([`corpusr`]), a
//! training-free rule table ([`morphr`]) and a character-level neural
//! transducer ([`neural`]). [`cascade_rewrite`] composes them as a backoff
//! chain, taking the first productive answer.

pub mod corpusr;
pub mod morphr;
pub mod neural;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::WordLabel;

pub use corpusr::{train_corpusr, CorpusRewriterModel};
pub use morphr::MorphRuleTable;
pub use neural::{train_neuralr, NeuralConfig, NeuralRewriterModel};

/// Which rewriter produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    CorpusR,
    MorphR,
    NeuralR,
    /// The input word passed through unchanged.
    PassThrough,
}

/// One weighted gender-alternative surface form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub score: f64,
    pub provenance: Provenance,
}

/// Ranked gender alternatives for one word.
///
/// Ordered by score descending, ties by surface. A pass-through set carries
/// exactly the input word with score 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub pass_through: bool,
}

impl CandidateSet {
    pub fn from_candidates(mut candidates: Vec<Candidate>) -> CandidateSet {
        candidates.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| a.surface.cmp(&b.surface))
        });
        CandidateSet { candidates, pass_through: false }
    }

    pub fn pass_through(word: &str) -> CandidateSet {
        CandidateSet {
            candidates: vec![Candidate {
                surface: word.to_string(),
                score: 0.0,
                provenance: Provenance::PassThrough,
            }],
            pass_through: true,
        }
    }

    /// Whether this set offers anything besides the input word itself.
    pub fn has_alternative_to(&self, word: &str) -> bool {
        !self.pass_through && self.candidates.iter().any(|c| c.surface != word)
    }
}

/// Queries the supplied rewriters in the fixed order CorpusR, MorphR, NeuralR
/// and returns the first productive candidate set.
///
/// A stage is skipped when it passes through or when every candidate it
/// returns equals the input surface; a context observed only with identity
/// targets is as uninformative as an unseen one. If every stage is skipped
/// the word passes through.
pub fn cascade_rewrite(
    corpusr: Option<&CorpusRewriterModel>,
    morphr: Option<&MorphRuleTable>,
    neuralr: Option<&NeuralRewriterModel>,
    word: &str,
    prev: &str,
    predicted: WordLabel,
    target: WordLabel,
) -> Result<CandidateSet> {
    if corpusr.is_none() && morphr.is_none() && neuralr.is_none() {
        return Err(Error::NoRewriterSupplied);
    }
    if let Some(model) = corpusr {
        let set = model.candidates(word, prev, target);
        if set.has_alternative_to(word) {
            return Ok(set);
        }
    }
    if let Some(table) = morphr {
        let set = table.candidates(word, predicted, target);
        if set.has_alternative_to(word) {
            return Ok(set);
        }
    }
    if let Some(model) = neuralr {
        let set = model.kbest(word, target);
        if set.has_alternative_to(word) {
            return Ok(set);
        }
    }
    Ok(CandidateSet::pass_through(word))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RewritePair;
    use crate::labels::{EncliticTable, SLOT_1F, SLOT_1M};

    fn label(s: &str) -> WordLabel {
        s.parse().unwrap()
    }

    fn pair(source: &str, prev: &str, target_surface: &str, target_label: &str) -> RewritePair {
        RewritePair {
            source: source.to_string(),
            prev: prev.to_string(),
            target_surface: target_surface.to_string(),
            target_label: label(target_label),
        }
    }

    #[test]
    fn candidate_sets_sort_by_score_then_surface() {
        let set = CandidateSet::from_candidates(vec![
            Candidate { surface: "b".into(), score: 0.5, provenance: Provenance::CorpusR },
            Candidate { surface: "a".into(), score: 0.5, provenance: Provenance::CorpusR },
            Candidate { surface: "c".into(), score: 0.9, provenance: Provenance::CorpusR },
        ]);
        let surfaces: Vec<&str> = set.candidates.iter().map(|c| c.surface.as_str()).collect();
        assert_eq!(surfaces, ["c", "a", "b"]);
    }

    #[test]
    fn cascade_requires_a_rewriter() {
        assert!(matches!(
            cascade_rewrite(None, None, None, "w", "<s>", label("1F+B"), label("1M+B")),
            Err(Error::NoRewriterSupplied)
        ));
    }

    #[test]
    fn cascade_prefers_corpusr_then_morphr() {
        let corpus_model = train_corpusr(&[pair("seen", "<s>", "seen-m", "1M+B")]);
        let morph = MorphRuleTable::new(
            vec![morphr::SuffixRule {
                match_suffix: String::new(),
                source: SLOT_1F,
                target: SLOT_1M,
                replacement: "x".to_string(),
            }],
            Default::default(),
            EncliticTable::default_table(),
        )
        .unwrap();

        // Seen by CorpusR: answered there, MorphR not consulted.
        let out = cascade_rewrite(
            Some(&corpus_model),
            Some(&morph),
            None,
            "seen",
            "<s>",
            label("1F+B"),
            label("1M+B"),
        )
        .unwrap();
        assert!(!out.pass_through);
        assert!(out.candidates.iter().all(|c| c.provenance == Provenance::CorpusR));

        // Unseen by CorpusR, covered by the suffix rule.
        let out = cascade_rewrite(
            Some(&corpus_model),
            Some(&morph),
            None,
            "unseen",
            "<s>",
            label("1F+B"),
            label("1M+B"),
        )
        .unwrap();
        assert!(out.candidates.iter().all(|c| c.provenance == Provenance::MorphR));
        assert_eq!(out.candidates[0].surface, "unseenx");

        // Nothing covers a base change for which no rule exists.
        let out = cascade_rewrite(
            Some(&corpus_model),
            Some(&morph),
            None,
            "unseen",
            "<s>",
            label("2F+B"),
            label("2M+B"),
        )
        .unwrap();
        assert!(out.pass_through);
        assert_eq!(out.candidates[0].surface, "unseen");
        assert_eq!(out.candidates[0].provenance, Provenance::PassThrough);
    }
}
